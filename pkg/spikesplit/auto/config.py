from copy import deepcopy
from typing import Dict, Any, Union, List

from spikesplit.utils.conf import Config, merge_config
from spikesplit.model.nets import TOPOLOGIES
from spikesplit.model.neuron import LifParams
from spikesplit.parallel.channel import ChannelModel, DEFAULT_THROUGHPUT_BPS
from spikesplit.frame.session import EDGE_ONLY

#: Label -> (dynamic exit, bottleneck)
LABELS = {
    "F-B": (False, False),
    "D-B": (True, False),
    "F+B": (False, True),
    "D+B": (True, True),
}
LABEL_ALIASES = {"F–B": "F-B", "D–B": "D-B"}
INPUTS = ("synthetic-images", "synthetic-events", "event-file")
MODES = ("simulated", "socket")
COMPUTE_TIMINGS = ("model", "wallclock")
SWEEP_AXES = {
    "alpha": "alpha",
    "t_max": "t_max",
    "code_channels": "code_channels",
    "bottleneck_channels": "code_channels",
    "split": "split",
}


class ConfigError(ValueError):
    pass


def generate_experiment_config(config: Union[Dict[str, Any], Config] = None) -> Config:
    """
    Default experiment configuration, keys already present in ``config``
    are kept.
    """
    default = Config(
        topology="resnet-mini",
        num_classes=10,
        input_shape=None,
        split="SP3",
        label="D+B",
        alpha=0.9,
        t_max=2,
        code_channels=4,
        bottleneck_kernel=None,
        lif_tau=2.0,
        lif_v_th=1.0,
        lif_v_reset=0.0,
        weights=None,
        seed=0,
        samples=10,
        input="synthetic-images",
        event_file=None,
        throughput_bps=DEFAULT_THROUGHPUT_BPS,
        downlink_throughput_bps=None,
        propagation_delay_s=0.0,
        jitter=0.0,
        jitter_seed=None,
        framing_bytes=0,
        mode="simulated",
        compute_timing=None,
        edge_flops_per_s=5e10,
        cloud_flops_per_s=5e12,
        pj_per_synop=23.0,
        host="127.0.0.1",
        port=0,
        timeout=30.0,
        output="results/run.csv",
        tensorboard_dir=None,
    )
    return merge_config(default, deepcopy(dict(config or {})))


def normalize_label(label: str) -> str:
    label = LABEL_ALIASES.get(label, label)
    if label not in LABELS:
        raise ConfigError(
            f'Invalid label "{label}", valid ones are: {", ".join(LABELS)}'
        )
    return label


def config_labels(config: Union[Dict[str, Any], Config]) -> List[str]:
    """
    Labels to run, ``label`` may be one label, a list of labels or
    ``"all"``.
    """
    label = config["label"]
    if label == "all":
        return list(LABELS)
    if isinstance(label, str):
        return [normalize_label(label)]
    labels = [normalize_label(l) for l in label]
    if not labels:
        raise ConfigError("At least one label is required.")
    return labels


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def validate_experiment_config(config: Union[Dict[str, Any], Config]) -> Config:
    """
    Fill in defaults and check an experiment configuration.

    Raises:
        ``ConfigError`` naming the offending key.
    """
    config = generate_experiment_config(config)
    unknown = sorted(set(config) - set(generate_experiment_config()))
    _require(
        not unknown,
        f"Unknown config keys {unknown}, "
        f"valid ones are: {sorted(generate_experiment_config())}",
    )
    labels = config_labels(config)
    config["label"] = labels[0] if len(labels) == 1 else labels

    topology = config["topology"]
    _require(
        isinstance(topology, str)
        and (topology in TOPOLOGIES or topology.endswith(".json")),
        f'Invalid topology "{topology}", use one of {", ".join(TOPOLOGIES)} '
        f"or a .json topology file",
    )
    if any(LABELS[l][0] for l in labels):
        alpha = config["alpha"]
        _require(
            isinstance(alpha, (int, float)) and 0 < alpha < 1,
            f"alpha must lie in (0, 1) for dynamic labels, got {alpha}",
        )
    t_max = config["t_max"]
    _require(
        isinstance(t_max, int) and 1 <= t_max <= 255,
        f"t_max must be an integer in [1, 255], got {t_max}",
    )
    if any(LABELS[l][1] for l in labels):
        _require(
            config["split"] != EDGE_ONLY,
            f"Labels with a bottleneck need a split point, not {EDGE_ONLY}",
        )
        _require(
            isinstance(config["code_channels"], int) and config["code_channels"] >= 1,
            f"code_channels must be a positive integer, "
            f"got {config['code_channels']}",
        )
    _require(
        isinstance(config["samples"], int) and config["samples"] >= 1,
        f"samples must be a positive integer, got {config['samples']}",
    )
    _require(
        isinstance(config["seed"], int) and config["seed"] >= 0,
        f"seed must be a non negative integer, got {config['seed']}",
    )
    _require(
        config["input"] in INPUTS,
        f'Invalid input "{config["input"]}", valid ones are: {", ".join(INPUTS)}',
    )
    _require(
        config["input"] != "event-file" or bool(config["event_file"]),
        "Input event-file requires the event_file key.",
    )
    _require(
        config["mode"] in MODES,
        f'Invalid mode "{config["mode"]}", valid ones are: {", ".join(MODES)}',
    )
    _require(
        config["compute_timing"] is None
        or config["compute_timing"] in COMPUTE_TIMINGS,
        f'Invalid compute_timing "{config["compute_timing"]}", '
        f'valid ones are: {", ".join(COMPUTE_TIMINGS)}',
    )
    for key in ("edge_flops_per_s", "cloud_flops_per_s", "pj_per_synop", "timeout"):
        _require(
            isinstance(config[key], (int, float)) and config[key] > 0,
            f"{key} must be > 0, got {config[key]}",
        )
    try:
        lif_params(config)
        uplink_channel(config)
        downlink_channel(config)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return config


def compute_timing(config: Config) -> str:
    if config["compute_timing"] is not None:
        return config["compute_timing"]
    return "model" if config["mode"] == "simulated" else "wallclock"


def lif_params(config: Config) -> LifParams:
    return LifParams(config["lif_tau"], config["lif_v_th"], config["lif_v_reset"])


def uplink_channel(config: Config) -> ChannelModel:
    return ChannelModel(
        throughput_bps=config["throughput_bps"],
        propagation_delay_s=config["propagation_delay_s"],
        jitter=config["jitter"],
        jitter_seed=config["jitter_seed"],
        framing_bytes=config["framing_bytes"],
    )


def downlink_channel(config: Config) -> ChannelModel:
    return ChannelModel(
        throughput_bps=config["downlink_throughput_bps"] or config["throughput_bps"],
        propagation_delay_s=config["propagation_delay_s"],
        jitter=config["jitter"],
        jitter_seed=config["jitter_seed"],
        framing_bytes=config["framing_bytes"],
    )
