"""
Experiment runner: builds deployments from an experiment config, drives
edge sessions against a cloud node and collects report rows.

In ``simulated`` mode the cloud node runs on a thread behind a simulated
transport pair, in ``socket`` mode it runs in a spawned process serving on
loopback and the edge connects over TCP.
"""
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Any, Dict, Iterable, List, Union
import os
import time

from spikesplit.utils.conf import Config, merge_config
from spikesplit.utils.logging import default_logger
from spikesplit.utils.tensor_board import TensorBoard
from spikesplit.model.graph import NetworkGraph, load_graph_file
from spikesplit.model.nets import build_topology
from spikesplit.model.layers import RateMonitor
from spikesplit.model.codec import Bottleneck, BottleneckConfig, default_bottleneck
from spikesplit.model.encoding import SampleEncoder
from spikesplit.model.weights import (
    ContainerError,
    seeded_init,
    save,
    load,
    load_model,
    container_crc,
)
from spikesplit.frame.exit import ExitPolicy
from spikesplit.frame.protocol import MessageType
from spikesplit.frame.energy import (
    EnergyModel,
    edge_energy,
    encoder_energy,
    model_compute_time,
    LatencyBreakdown,
)
from spikesplit.frame.report import RunReport, build_report, merge_reports
from spikesplit.frame.session import (
    Deployment,
    SampleResult,
    edge_run_sample,
    run_local_sample,
    serve_connection,
)
from spikesplit.parallel.thread import Thread
from spikesplit.parallel.process import Process, ProcessException
from spikesplit.parallel.transport import (
    SEND,
    RECV,
    Transport,
    TransportError,
    simulated_pair,
    connect,
)
from spikesplit.parallel.server import MessageServer
from spikesplit.utils.checker import CheckError
from .config import (
    LABELS,
    SWEEP_AXES,
    ConfigError,
    validate_experiment_config,
    config_labels,
    compute_timing,
    lif_params,
    uplink_channel,
    downlink_channel,
)
from .dataset import SyntheticDataset, sample_seed, event_file_sensor


def build_graph(config: Config) -> NetworkGraph:
    """
    Build the configured topology, with its input shape matched to the
    configured input kind.
    """
    topology = config["topology"]
    if topology.endswith(".json"):
        return load_graph_file(topology)
    lif = lif_params(config)
    in_shape = config["input_shape"]
    if in_shape is None and config["input"] == "event-file":
        in_shape = list(event_file_sensor(config["event_file"]))
    graph = build_topology(topology, in_shape, config["num_classes"], lif)
    if config["input"] != "synthetic-images" and graph.in_shape[0] != 2:
        if in_shape is not None:
            raise ConfigError(
                f"Event inputs need 2 input channels, input_shape is {in_shape}"
            )
        graph = build_topology(
            topology, (2,) + graph.in_shape.dims[1:], config["num_classes"], lif
        )
    return graph


def build_bottleneck(config: Config, graph: NetworkGraph) -> Bottleneck:
    raw_shape = graph.shape_at(graph.split_index(config["split"]))
    kernel = config["bottleneck_kernel"]
    if kernel is None:
        bottleneck_config = default_bottleneck(
            raw_shape, config["code_channels"], lif_params(config)
        )
    else:
        bottleneck_config = BottleneckConfig(
            raw_shape, config["code_channels"], kernel, kernel, 0, lif_params(config)
        )
    return Bottleneck(bottleneck_config)


def build_deployment(config: Config, label: str) -> Deployment:
    """
    Build the deployment of one label, with weights from ``config.weights``
    or seeded from ``config.seed``. All labels of a config share the
    network weights.

    Raises:
        ``ConfigError`` if the split, bottleneck or weights do not fit the
        topology.
    """
    _, with_bottleneck = LABELS[label]
    graph = build_graph(config)
    try:
        bottleneck = build_bottleneck(config, graph) if with_bottleneck else None
        if config["weights"]:
            with open(config["weights"], "rb") as file:
                data = file.read()
            entries = load(data)
        else:
            entries = seeded_init(graph, config["seed"], bottleneck)
            data = save(entries)
        load_model(entries, graph, bottleneck)
        return Deployment(graph, config["split"], bottleneck, container_crc(data))
    except (CheckError, ContainerError, RuntimeError) as e:
        raise ConfigError(f"Invalid deployment of label {label}: {e}") from e


def build_dataset(config: Config, graph: NetworkGraph) -> SyntheticDataset:
    return SyntheticDataset(
        config["input"],
        graph.in_shape,
        config["samples"],
        config["seed"],
        config["event_file"],
    )


@dataclass
class _RunContext:
    config: Config
    label: str
    deployment: Deployment
    policy: ExitPolicy
    energy_model: EnergyModel
    timing: str
    sweep_axis: str = ""
    sweep_value: str = ""


def sample_row(index: int, result: SampleResult, ctx: _RunContext) -> Dict[str, Any]:
    """
    Turn the outcome of one sample into a report row.
    """
    deployment = ctx.deployment
    config = ctx.config
    t_exit = result.t_exit

    uplink_s = downlink_s = 0.0
    uplink_wire = downlink_wire = 0
    for entry in result.log:
        if entry.direction == SEND:
            uplink_wire += entry.nbytes
            if entry.msg_type == MessageType.FEATURE:
                uplink_s += entry.modeled_s
        elif entry.direction == RECV:
            downlink_wire += entry.nbytes
            if entry.msg_type == MessageType.LOGITS:
                downlink_s += entry.modeled_s

    if ctx.timing == "model":
        edge_s = model_compute_time(
            deployment.edge_flops(), t_exit, config["edge_flops_per_s"]
        )
        cloud_s = (
            0.0
            if deployment.edge_only
            else model_compute_time(
                deployment.cloud_flops(), t_exit, config["cloud_flops_per_s"]
            )
        )
    else:
        edge_s = sum(result.edge_s)
        cloud_s = sum(result.rtt_s)
    latency = LatencyBreakdown(edge_s, uplink_s, cloud_s, downlink_s)

    if deployment.edge_only:
        raw_bits = uplink_bits = 0
    else:
        raw_bits = deployment.raw_shape.numel * t_exit
        uplink_bits = deployment.feature_shape.numel * t_exit
    layers = result.monitor.layers()

    return dict(
        sweep_axis=ctx.sweep_axis,
        sweep_value=ctx.sweep_value,
        sample=index,
        label=ctx.label,
        split=deployment.split,
        t_max=ctx.policy.t_max,
        t_exit=t_exit,
        prediction=result.prediction,
        raw_bits=raw_bits,
        uplink_bits=uplink_bits,
        uplink_payload_bytes=result.uplink_payload_bytes,
        uplink_wire_bytes=uplink_wire,
        downlink_wire_bytes=downlink_wire,
        compression_ratio=raw_bits / uplink_bits if uplink_bits else None,
        edge_compute_s=latency.edge_compute_s,
        uplink_s=latency.uplink_s,
        cloud_compute_s=latency.cloud_compute_s,
        downlink_s=latency.downlink_s,
        total_s=latency.total_s,
        edge_energy_j=edge_energy(
            layers,
            t_exit,
            ctx.energy_model,
            required=deployment.edge_synaptic_layers(),
        ),
        encoder_energy_j=encoder_energy(layers, t_exit, ctx.energy_model),
    )


def _run_samples(
    ctx: _RunContext,
    dataset: SyntheticDataset,
    transport: Transport = None,
    board: TensorBoard = None,
) -> List[Dict[str, Any]]:
    rows = []
    for index, sample in dataset:
        encoder = SampleEncoder(
            sample, ctx.policy.t_max, sample_seed(ctx.config["seed"], index)
        )
        monitor = RateMonitor()
        if transport is None:
            result = run_local_sample(
                ctx.deployment.graph, encoder, ctx.policy, monitor, index + 1
            )
        else:
            result = edge_run_sample(
                ctx.deployment,
                encoder,
                ctx.policy,
                transport,
                session_id=index + 1,
                monitor=monitor,
                timeout=ctx.config["timeout"],
            )
        row = sample_row(index, result, ctx)
        rows.append(row)
        if board is not None:
            board.add_sample_scalars(
                f"{ctx.label}/{ctx.deployment.split}",
                {
                    "t_exit": row["t_exit"],
                    "total_s": row["total_s"],
                    "uplink_bits": row["uplink_bits"],
                    "edge_energy_j": row["edge_energy_j"],
                },
                index,
            )
    return rows


def _run_simulated(ctx: _RunContext, dataset, board, logger) -> List[Dict[str, Any]]:
    edge, cloud = simulated_pair(uplink_channel(ctx.config), downlink_channel(ctx.config))
    node = Thread(
        target=serve_connection,
        args=(ctx.deployment, cloud, logger),
        name=f"cloud-{ctx.label}",
    )
    node.start()
    try:
        rows = _run_samples(ctx, dataset, edge, board)
    finally:
        edge.close()
    stats = node.join_result(timeout=ctx.config["timeout"])
    logger.debug(f"Cloud node served {stats.completed} sessions.")
    return rows


def _wait_for_port(node: Process, port_pipe, timeout: float) -> int:
    deadline = time.monotonic() + timeout
    while not port_pipe.poll(0.1):
        node.watch()
        if not node.is_alive():
            raise ProcessException("Cloud node exited before listening.")
        if time.monotonic() > deadline:
            node.stop()
            raise TransportError(f"Cloud node did not listen within {timeout} s")
    return port_pipe.recv()


def _run_socket(ctx: _RunContext, dataset, board, logger) -> List[Dict[str, Any]]:
    config = ctx.config
    port_recv, port_send = get_context("spawn").Pipe(duplex=False)
    node_config = merge_config(config, {"label": ctx.label, "output": None})
    node = Process(
        target=serve_cloud,
        kwargs={"config": dict(node_config), "ready": port_send},
        name=f"cloud-{ctx.label}",
    )
    node.start()
    try:
        port = _wait_for_port(node, port_recv, config["timeout"])
        edge = connect(
            (config["host"], port),
            uplink_channel(config),
            downlink_channel(config),
            timeout=config["timeout"],
        )
        try:
            return _run_samples(ctx, dataset, edge, board)
        finally:
            edge.close()
    finally:
        node.stop()


def _exit_policy(config: Config, dynamic: bool) -> ExitPolicy:
    if dynamic:
        return ExitPolicy(config["alpha"], config["t_max"])
    # alpha is unused without early exit
    return ExitPolicy(t_max=config["t_max"], dynamic=False)


def run_experiment(
    config: Union[Dict[str, Any], Config],
    logger=None,
    sweep_axis: str = "",
    sweep_value: str = "",
) -> RunReport:
    """
    Run every configured label over the dataset and build the report, the
    report is written to ``config.output`` unless it is ``None``.

    In simulated mode with ``model`` compute timing the written CSV bytes
    depend on the config only.

    Raises:
        ``ConfigError`` on invalid configurations.
    """
    logger = logger or default_logger
    config = validate_experiment_config(config)
    timing = compute_timing(config)
    energy_model = EnergyModel(config["pj_per_synop"])
    board = None
    if config["tensorboard_dir"]:
        board = TensorBoard()
        board.init(config["tensorboard_dir"])

    rows = []
    try:
        for label in config_labels(config):
            dynamic, _ = LABELS[label]
            deployment = build_deployment(config, label)
            dataset = build_dataset(config, deployment.graph)
            ctx = _RunContext(
                config,
                label,
                deployment,
                _exit_policy(config, dynamic),
                energy_model,
                timing,
                sweep_axis,
                sweep_value,
            )
            logger.info(
                f"Running {label} on {deployment.graph.name} split "
                f"{deployment.split}, {config['samples']} samples, "
                f"{config['mode']} mode."
            )
            if deployment.edge_only:
                label_rows = _run_samples(ctx, dataset, None, board)
            elif config["mode"] == "simulated":
                label_rows = _run_simulated(ctx, dataset, board, logger)
            else:
                label_rows = _run_socket(ctx, dataset, board, logger)
            rows.extend(label_rows)
    finally:
        if board is not None:
            board.close()

    report = build_report(rows)
    for aggregate in report.aggregates:
        logger.info(
            f"{aggregate['label']} {aggregate['split']}: "
            f"T_avg={aggregate['t_avg']:.3f}, "
            f"uplink bits={aggregate['uplink_bits_total']}, "
            f"mean latency={aggregate['latency_mean_s']:.6f}s"
        )
    if config["output"]:
        paths = report.write(config["output"])
        logger.info(f"Report written to {', '.join(paths)}")
    return report


def sweep(
    axis: str,
    values: Iterable[Any],
    config: Union[Dict[str, Any], Config],
    logger=None,
) -> RunReport:
    """
    Run the experiment once per value of one config key and combine the
    reports, rows carry the axis and value in their sweep columns.

    Args:
        axis: ``alpha``, ``t_max``, ``code_channels`` (or
            ``bottleneck_channels``) or ``split``.
        values: Values of the axis.
        config: Base experiment config.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(
            f'Invalid sweep axis "{axis}", valid ones are: {", ".join(SWEEP_AXES)}'
        )
    values = list(values)
    if not values:
        raise ConfigError(f"Sweep over {axis} needs at least one value.")
    key = SWEEP_AXES[axis]
    config = validate_experiment_config(config)
    reports = [
        run_experiment(
            merge_config(config, {key: value, "output": None}),
            logger,
            sweep_axis=key,
            sweep_value=str(value),
        )
        for value in values
    ]
    report = merge_reports(reports)
    if config["output"]:
        report.write(config["output"])
    return report


def serve_cloud(
    config: Union[Dict[str, Any], Config],
    host: str = None,
    port: int = None,
    logger=None,
    ready=None,
):
    """
    Run a cloud node of one label until the process is terminated. Every
    accepted connection is served on its own thread, sessions of a
    connection run one after another with fresh states.

    Args:
        config: Experiment config naming a single label.
        host: Address to bind, ``config.host`` by default.
        port: Port to bind, ``config.port`` by default, 0 picks a free one.
        logger: Logger of session summaries.
        ready: Optional connection the bound port is sent to.

    Raises:
        ``OSError`` if the address can not be bound.
    """
    logger = logger or default_logger
    config = validate_experiment_config(config)
    labels = config_labels(config)
    if len(labels) != 1:
        raise ConfigError(f"A cloud node serves one label, got {labels}")
    deployment = build_deployment(config, labels[0])
    if deployment.edge_only:
        raise ConfigError("An edge-only deployment has no cloud node.")

    address = (host or config["host"], config["port"] if port is None else port)
    server = MessageServer(
        address,
        lambda transport: serve_connection(deployment, transport, logger),
        channel=downlink_channel(config),
        logger=logger,
    )
    logger.info(
        f"Cloud node of {labels[0]} on {deployment.graph.name} split "
        f"{deployment.split} listening on {address[0]}:{server.port} "
        f"(pid {os.getpid()}, digest {deployment.digest.hex()[:16]})"
    )
    if ready is not None:
        ready.send(server.port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
