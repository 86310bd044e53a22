from spikesplit.utils.tensor_board import TensorBoard

import os
import pytest


class TestTensorBoard:
    def test_tensor_board(self, tmpdir):
        board = TensorBoard()
        assert not board.is_inited()
        board.init(str(tmpdir))
        with pytest.raises(RuntimeError, match="has been initialized"):
            board.init(str(tmpdir))
        assert board.is_inited()
        board.add_sample_scalars("D+B/SP3", {"t_exit": 1, "total_s": 0.5}, 0)
        board.close()
        assert not board.is_inited()
        assert any(name.startswith("events") for name in os.listdir(str(tmpdir)))

    def test_uninitialized_board_ignores_scalars(self):
        board = TensorBoard()
        board.add_sample_scalars("F-B/SP1", {"t_exit": 2}, 0)
        board.close()
