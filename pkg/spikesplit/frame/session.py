"""
Per-sample sessions of the split inference loop.

A completed session exchanges::

    edge  -> HELLO(digest)         cloud checks the deployment digest
    cloud -> HELLO(digest)         or ERROR on mismatch
    edge  -> FEATURE(t)            for t = 1, 2, ... at most t_max
    cloud -> LOGITS(t)             cumulative decision logits
    edge  -> EXIT(t_exit)          once the exit controller stops

Each side runs its own :class:`SessionState` machine and creates fresh LIF
states per session.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Any
import time
import numpy as np

from spikesplit.model.spike import SpikeTensor, Shape, BitFormatError
from spikesplit.model.graph import NetworkGraph
from spikesplit.model.layers import RateMonitor
from spikesplit.model.codec import Bottleneck
from spikesplit.model.weights import config_digest
from spikesplit.utils.checker import CheckError
from spikesplit.utils.helper_classes import Stopwatch
from spikesplit.utils.logging import default_logger
from spikesplit.parallel.transport import (
    Transport,
    TransportError,
    TransportClosed,
    LogEntry,
)
from .exit import ExitPolicy, LogitsRecord, decide
from .protocol import (
    ProtocolError,
    HeaderError,
    MessageType,
    ErrorCode,
    FeaturePayload,
    wire_shape,
    LogitsPayload,
    FLAG_COMPRESSED,
    build_message,
    decode_message,
    encode_exit,
    decode_exit,
    encode_error,
    decode_error,
    encode_hello,
    decode_hello,
)

EDGE_ONLY = "edge-only"
InputFn = Callable[[int], SpikeTensor]


class HandshakeError(ProtocolError):
    pass


class Deployment:
    """
    What edge and cloud must agree on: topology, split point, optional
    bottleneck and the weights (through their container CRC).

    Args:
        graph: Network with loaded weights.
        split: Split point name, or ``"edge-only"`` to run everything on
            the edge.
        bottleneck: Codec placed at the split point, ``None`` sends the
            raw split activation.
        crc: CRC32 of the weights container both sides loaded.
    """

    def __init__(
        self,
        graph: NetworkGraph,
        split: str,
        bottleneck: Bottleneck = None,
        crc: int = 0,
    ):
        self.graph = graph
        self.split = split
        self.bottleneck = bottleneck
        self.crc = crc
        if split == EDGE_ONLY:
            if bottleneck is not None:
                raise CheckError("An edge-only deployment can not have a bottleneck.")
            self.split_index = graph.depth
        else:
            self.split_index = graph.split_index(split)
        self.raw_shape = graph.shape_at(self.split_index)
        if bottleneck is not None and bottleneck.in_shape != self.raw_shape:
            raise CheckError(
                f"Bottleneck input {list(bottleneck.in_shape)} does not match "
                f"split {split} activation {list(self.raw_shape)}"
            )
        if not self.edge_only:
            try:
                self.wire_shape = wire_shape(self.feature_shape)
            except ProtocolError as e:
                raise CheckError(f"Split {split}: {e}") from e
        self.digest = config_digest(self.describe(), crc)

    @property
    def edge_only(self) -> bool:
        return self.split == EDGE_ONLY

    @property
    def compressed(self) -> bool:
        return self.bottleneck is not None

    @property
    def flags(self) -> int:
        return FLAG_COMPRESSED if self.compressed else 0

    @property
    def feature_shape(self) -> Shape:
        return self.bottleneck.code_shape if self.compressed else self.raw_shape

    @property
    def num_classes(self) -> int:
        return self.graph.num_classes

    def describe(self) -> Dict[str, Any]:
        return {
            "topology": self.graph.describe(),
            "split": self.split,
            "bottleneck": None
            if self.bottleneck is None
            else self.bottleneck.config.to_dict(),
        }

    def edge_synaptic_layers(self) -> Dict[str, int]:
        layers = self.graph.synaptic_layers(0, self.split_index)
        if self.compressed:
            layers["bottleneck.encoder"] = self.bottleneck.encoder_conv.flops()
        return layers

    def edge_flops(self) -> int:
        """
        Dense FLOPs of one edge timestep, encoder included.
        """
        flops = self.graph.flops(0, self.split_index)
        if self.compressed:
            flops += self.bottleneck.encoder_flops()
        return flops

    def cloud_flops(self) -> int:
        flops = self.graph.flops(self.split_index, self.graph.depth)
        if self.compressed:
            flops += self.bottleneck.decoder_flops()
        return flops


class Role(Enum):
    EDGE = "edge"
    CLOUD = "cloud"


class Phase(Enum):
    IDLE = "idle"
    HANDSHAKE = "handshake"
    READY = "ready"
    AWAIT_LOGITS = "await_logits"
    AWAIT_FEATURE = "await_feature"
    COMPUTING = "computing"
    DONE = "done"


_SEND, _RECV = "send", "recv"

_TRANSITIONS = {
    Role.EDGE: {
        (_SEND, MessageType.HELLO): ((Phase.IDLE,), Phase.HANDSHAKE),
        (_RECV, MessageType.HELLO): ((Phase.HANDSHAKE,), Phase.READY),
        (_SEND, MessageType.FEATURE): ((Phase.READY,), Phase.AWAIT_LOGITS),
        (_RECV, MessageType.LOGITS): ((Phase.AWAIT_LOGITS,), Phase.READY),
        (_SEND, MessageType.EXIT): ((Phase.READY,), Phase.DONE),
    },
    Role.CLOUD: {
        (_RECV, MessageType.HELLO): ((Phase.IDLE,), Phase.HANDSHAKE),
        (_SEND, MessageType.HELLO): ((Phase.HANDSHAKE,), Phase.AWAIT_FEATURE),
        (_RECV, MessageType.FEATURE): ((Phase.AWAIT_FEATURE,), Phase.COMPUTING),
        (_SEND, MessageType.LOGITS): ((Phase.COMPUTING,), Phase.AWAIT_FEATURE),
        (_RECV, MessageType.EXIT): ((Phase.AWAIT_FEATURE,), Phase.DONE),
    },
}


class SessionState:
    """
    Protocol state machine of one side of one session.

    Feature timesteps must count up from 1 without gaps, a LOGITS reply
    and the final EXIT carry the timestep of the last FEATURE. ERROR ends
    the session from any phase, nothing is accepted after that.
    """

    def __init__(self, role: Role, session_id: int, digest: bytes = b""):
        self.role = role
        self.session_id = session_id
        self.digest = digest
        self.phase = Phase.IDLE
        self.timestep = 0
        self.trace = []  # type: List[MessageType]

    @property
    def done(self) -> bool:
        return self.phase is Phase.DONE

    def _advance(self, direction: str, msg_type: MessageType, timestep: int):
        if self.done:
            raise ProtocolError(
                f"Session {self.session_id} is done, "
                f"can not {direction} {msg_type.name}",
                ErrorCode.UNEXPECTED_MESSAGE,
            )
        if msg_type is MessageType.ERROR:
            self.phase = Phase.DONE
            self.trace.append(msg_type)
            return
        key = (direction, msg_type)
        allowed, target = _TRANSITIONS[self.role].get(key, ((), None))
        if self.phase not in allowed:
            raise ProtocolError(
                f"{self.role.value} can not {direction} {msg_type.name} "
                f"in phase {self.phase.value}",
                ErrorCode.UNEXPECTED_MESSAGE,
            )
        if msg_type is MessageType.FEATURE:
            if timestep != self.timestep + 1:
                raise ProtocolError(
                    f"Feature timestep {timestep} out of order, "
                    f"expected {self.timestep + 1}",
                    ErrorCode.OUT_OF_ORDER,
                )
            self.timestep = timestep
        elif msg_type in (MessageType.LOGITS, MessageType.EXIT):
            if timestep != self.timestep:
                raise ProtocolError(
                    f"{msg_type.name} timestep {timestep} does not match "
                    f"feature timestep {self.timestep}",
                    ErrorCode.OUT_OF_ORDER,
                )
        self.phase = target
        self.trace.append(msg_type)

    def on_send(self, msg_type: MessageType, timestep: int = 0):
        self._advance(_SEND, msg_type, timestep)

    def on_recv(self, msg_type: MessageType, timestep: int = 0):
        self._advance(_RECV, msg_type, timestep)


@dataclass
class SampleResult:
    """
    Outcome of one sample on the edge.

    Attributes:
        edge_s: Measured edge compute seconds of every timestep.
        rtt_s: Measured seconds from sending a FEATURE until its LOGITS
            arrived, empty for local runs.
        uplink_payload_bytes: Sum of FEATURE payload sizes.
        log: Transport log entries of this session.
    """

    session_id: int
    prediction: int
    t_exit: int
    logits: np.ndarray
    confidences: List[float] = field(default_factory=list)
    edge_s: List[float] = field(default_factory=list)
    rtt_s: List[float] = field(default_factory=list)
    uplink_payload_bytes: int = 0
    trace: List[MessageType] = field(default_factory=list)
    log: List[LogEntry] = field(default_factory=list)
    monitor: Optional[RateMonitor] = None


def _send(
    transport: Transport,
    state: SessionState,
    msg_type: MessageType,
    timestep: int = 0,
    payload: bytes = b"",
    flags: int = 0,
):
    state.on_send(msg_type, timestep)
    transport.send(build_message(msg_type, state.session_id, timestep, payload, flags))


def _recv(transport: Transport, state: SessionState, timeout: float = None):
    header, payload = decode_message(transport.recv(timeout))
    if state.session_id is not None and header.session_id != state.session_id:
        raise ProtocolError(
            f"Message of session {header.session_id} in session {state.session_id}",
            ErrorCode.UNEXPECTED_MESSAGE,
        )
    state.on_recv(header.msg_type, header.timestep)
    if header.msg_type is MessageType.ERROR:
        code, message = decode_error(payload)
        cls = HandshakeError if code == ErrorCode.DIGEST_MISMATCH else ProtocolError
        raise cls(f"Peer reported error {code}: {message}", code)
    return header, payload


def _abort(transport: Transport, state: SessionState, code: int, message: str):
    """
    Tell the peer why the session ends, if the transport still works.
    """
    if state.done:
        return
    if state.session_id is None:
        state.session_id = 0
    try:
        _send(transport, state, MessageType.ERROR, 0, encode_error(code, message))
    except (TransportError, ProtocolError):
        pass


def edge_run_sample(
    deployment: Deployment,
    input_fn: InputFn,
    policy: ExitPolicy,
    transport: Transport,
    session_id: int = 1,
    monitor: RateMonitor = None,
    timeout: float = None,
) -> SampleResult:
    """
    Run one sample as the edge node.

    Args:
        deployment: Shared deployment, with ``split != "edge-only"``.
        input_fn: Input spikes of a 1-based timestep.
        policy: Exit policy.
        transport: Connected transport.
        session_id: Id of this session.
        monitor: Optional recorder of edge layer activity.
        timeout: Seconds to wait for each reply.

    Raises:
        ``HandshakeError`` if the cloud rejects the deployment digest,
        ``ProtocolError`` on protocol violations, ``TransportError`` if
        the transport fails.
    """
    if deployment.edge_only:
        raise CheckError("Edge-only deployments run with run_local_sample.")
    graph = deployment.graph
    state = SessionState(Role.EDGE, session_id, deployment.digest)
    mark = transport.mark()
    result = SampleResult(session_id, -1, 0, np.zeros(0, dtype=np.float32))
    result.monitor = monitor

    try:
        _send(transport, state, MessageType.HELLO, 0, encode_hello(deployment.digest))
        _, payload = _recv(transport, state, timeout)
        if decode_hello(payload) != deployment.digest:
            raise HandshakeError(
                "Cloud acknowledged another deployment digest",
                ErrorCode.DIGEST_MISMATCH,
            )

        states = graph.create_states(0, deployment.split_index)
        encoder_state = (
            deployment.bottleneck.create_states()[0] if deployment.compressed else None
        )
        for t in range(1, policy.t_max + 1):
            watch = Stopwatch()
            with watch:
                out = graph.forward_timestep(
                    states, input_fn(t), 0, deployment.split_index, monitor
                )
                spikes = SpikeTensor.from_tensor(out)
                if deployment.compressed:
                    spikes = deployment.bottleneck.encode(spikes, encoder_state, monitor)
                feature = FeaturePayload.from_spikes(spikes).encode()
            result.edge_s.append(watch.total)

            begin = time.perf_counter()
            _send(transport, state, MessageType.FEATURE, t, feature, deployment.flags)
            header, payload = _recv(transport, state, timeout)
            result.rtt_s.append(time.perf_counter() - begin)
            result.uplink_payload_bytes += len(feature)

            if header.msg_type is not MessageType.LOGITS:
                raise ProtocolError(
                    f"Expected LOGITS, got {header.msg_type.name}",
                    ErrorCode.UNEXPECTED_MESSAGE,
                )
            logits = LogitsPayload.decode(payload).values
            if logits.shape[0] != deployment.num_classes:
                raise ProtocolError(
                    f"Expected {deployment.num_classes} logits, got {logits.shape[0]}",
                    ErrorCode.UNEXPECTED_MESSAGE,
                )
            decision, cs, prediction = decide(logits, t, policy)
            result.confidences.append(cs)
            result.logits = logits
            result.prediction = prediction
            if decision.stops:
                result.t_exit = t
                _send(transport, state, MessageType.EXIT, t, encode_exit(t))
                break
    except ProtocolError as e:
        _abort(transport, state, e.code or ErrorCode.INTERNAL, str(e))
        raise
    except (CheckError, BitFormatError) as e:
        _abort(transport, state, ErrorCode.INTERNAL, str(e))
        raise
    finally:
        result.trace = list(state.trace)
        result.log = transport.entries_since(mark)
    return result


@dataclass
class CloudSessionSummary:
    session_id: int
    t_exit: int
    compute_s: float


def cloud_run_session(
    deployment: Deployment,
    transport: Transport,
    logger=None,
    timeout: float = None,
) -> CloudSessionSummary:
    """
    Serve one session as the cloud node.

    Raises:
        ``HandshakeError`` on a digest mismatch, ``ProtocolError`` on
        protocol violations (after sending ERROR to the edge, a
        ``HeaderError`` also closes ``transport``), ``TransportClosed`` if
        the edge closed before the first message.
    """
    logger = logger or default_logger
    graph = deployment.graph
    state = SessionState(Role.CLOUD, None, deployment.digest)
    start, end = deployment.split_index, graph.depth
    watch = Stopwatch()

    try:
        header, payload = decode_message(transport.recv(timeout))
        state.session_id = header.session_id
        state.on_recv(header.msg_type, header.timestep)
        if header.msg_type is not MessageType.HELLO:
            raise ProtocolError(
                f"Session must start with HELLO, got {header.msg_type.name}",
                ErrorCode.UNEXPECTED_MESSAGE,
            )
        digest = decode_hello(payload)
        if digest != deployment.digest:
            raise HandshakeError(
                f"Session {header.session_id}: deployment digest mismatch",
                ErrorCode.DIGEST_MISMATCH,
            )
        _send(transport, state, MessageType.HELLO, 0, encode_hello(digest))

        states = graph.create_states(start, end)
        decoder_state = (
            deployment.bottleneck.create_states()[1] if deployment.compressed else None
        )
        record = LogitsRecord(deployment.num_classes)

        while True:
            header, payload = _recv(transport, state, timeout)
            if header.msg_type is MessageType.EXIT:
                if decode_exit(payload) != header.timestep:
                    raise ProtocolError(
                        "EXIT payload disagrees with its header timestep",
                        ErrorCode.OUT_OF_ORDER,
                    )
                break
            if header.flags != deployment.flags:
                raise ProtocolError(
                    f"Feature flags {header.flags} do not match the "
                    f"deployment flags {deployment.flags}",
                    ErrorCode.BAD_FEATURE,
                )
            try:
                feature = FeaturePayload.decode(payload)
            except ProtocolError as e:
                raise ProtocolError(str(e), ErrorCode.BAD_FEATURE) from e
            if feature.shape != deployment.wire_shape:
                raise ProtocolError(
                    f"Feature shape {list(feature.shape)} does not match "
                    f"{list(deployment.wire_shape)}",
                    ErrorCode.BAD_FEATURE,
                )
            with watch:
                try:
                    spikes = feature.to_spikes(deployment.feature_shape)
                except BitFormatError as e:
                    raise ProtocolError(str(e), ErrorCode.BAD_FEATURE) from e
                if deployment.compressed:
                    spikes = deployment.bottleneck.decode(spikes, decoder_state)
                logits = graph.forward_timestep(states, spikes, start, end)
                cumulative = record.add(logits.numpy())
            _send(
                transport,
                state,
                MessageType.LOGITS,
                header.timestep,
                LogitsPayload(cumulative).encode(),
            )
    except ProtocolError as e:
        if isinstance(e, HandshakeError):
            logger.warning(f"Rejected handshake: {e}")
        else:
            logger.warning(f"Aborted session {state.session_id}: {e}")
        _abort(transport, state, e.code or ErrorCode.INTERNAL, str(e))
        if isinstance(e, HeaderError):
            transport.close()
        raise

    graph.reset_state(states)
    summary = CloudSessionSummary(state.session_id, state.timestep, watch.total)
    logger.info(
        f"Session {summary.session_id} done, t_exit={summary.t_exit}, "
        f"compute={summary.compute_s:.6f}s"
    )
    return summary


@dataclass
class ServeStats:
    completed: int = 0
    failed: int = 0
    summaries: List[CloudSessionSummary] = field(default_factory=list)


def serve_connection(
    deployment: Deployment, transport: Transport, logger=None
) -> ServeStats:
    """
    Serve sequential sessions on one transport until the edge closes it.
    Rejected or aborted sessions are counted, serving goes on.
    """
    logger = logger or default_logger
    stats = ServeStats()
    while True:
        try:
            summary = cloud_run_session(deployment, transport, logger)
        except TransportClosed:
            break
        except ProtocolError:
            stats.failed += 1
            continue
        except TransportError as e:
            logger.warning(f"Transport failed: {e}")
            break
        stats.completed += 1
        stats.summaries.append(summary)
    logger.info(
        f"Connection closed after {stats.completed} sessions, "
        f"{stats.failed} failed."
    )
    return stats


def run_local_sample(
    graph: NetworkGraph,
    input_fn: InputFn,
    policy: ExitPolicy,
    monitor: RateMonitor = None,
    session_id: int = 0,
) -> SampleResult:
    """
    Run the whole network in process with the same exit loop and logits
    accumulation as a split session. Serves as the edge-only baseline and
    as the monolithic reference of split runs.
    """
    states = graph.create_states()
    record = LogitsRecord(graph.num_classes)
    result = SampleResult(session_id, -1, 0, np.zeros(0, dtype=np.float32))
    result.monitor = monitor
    for t in range(1, policy.t_max + 1):
        watch = Stopwatch()
        with watch:
            logits = graph.forward_timestep(states, input_fn(t), monitor=monitor)
            cumulative = record.add(logits.numpy())
        result.edge_s.append(watch.total)
        decision, cs, prediction = decide(cumulative, t, policy)
        result.confidences.append(cs)
        result.logits = cumulative
        result.prediction = prediction
        if decision.stops:
            result.t_exit = t
            break
    return result
