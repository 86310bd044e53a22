from os.path import join
from spikesplit.utils.prepare import (
    prep_create_dirs,
    prep_create_parent_dir,
    prep_load_weights,
)
from spikesplit.utils.logging import fake_logger

import os
import pytest
import torch as t


def test_prep_create_dirs(tmpdir):
    tmp_dir = str(tmpdir.make_numbered_dir())
    prep_create_dirs([join(tmp_dir, "some_dir", "nested")])
    assert os.path.isdir(join(tmp_dir, "some_dir", "nested"))
    # existing directories are fine
    prep_create_dirs([join(tmp_dir, "some_dir")])


def test_prep_create_parent_dir(tmpdir):
    tmp_dir = str(tmpdir.make_numbered_dir())
    prep_create_parent_dir(join(tmp_dir, "results", "run.csv"))
    assert os.path.isdir(join(tmp_dir, "results"))
    assert not os.path.exists(join(tmp_dir, "results", "run.csv"))


class TestPrepLoadWeights:
    def test_load(self):
        model = t.nn.Linear(4, 2)
        entries = {"weight": t.ones([2, 4]), "bias": t.full([2], 3.0)}
        prep_load_weights(model, entries)
        assert t.all(model.weight == 1)
        assert t.all(model.bias == 3)

    def test_missing_strict(self):
        model = t.nn.Linear(4, 2)
        with pytest.raises(RuntimeError, match='"bias" is missing'):
            prep_load_weights(model, {"weight": t.ones([2, 4])})

    def test_missing_not_strict(self):
        model = t.nn.Linear(4, 2)
        bias = model.bias.detach().clone()
        prep_load_weights(
            model, {"weight": t.ones([2, 4])}, strict=False, logger=fake_logger
        )
        assert t.all(model.weight == 1)
        assert t.equal(model.bias.detach(), bias)

    def test_shape_mismatch(self):
        model = t.nn.Linear(4, 2)
        entries = {"weight": t.ones([4, 2]), "bias": t.zeros([2])}
        with pytest.raises(RuntimeError, match="model expects"):
            prep_load_weights(model, entries)
