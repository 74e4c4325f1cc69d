# optical.py
"""
Optical layer services for the horseshoe: routing, loss/OSNR feasibility,
first-fit channel assignment over filterless broadcast segments, wavelength
blocker configuration and media channel lifecycle.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import networkx as nx
import numpy as np

import configure
from errors import OpticalError
from topology import AmpVariant, broadcast_segments
from utils import generate_sequence_id

logger = logging.getLogger("optical")

FORMAT_ORDER = ("DP-QPSK", "DP-16QAM", "DP-64QAM")


@dataclass(frozen=True)
class ModulationFormat:
    name: str
    baud_gbaud: float
    net_rate_gbps: float
    required_osnr_db: float


def load_format_catalog(table=None):
    """
    Build the modulation format table and check its ordering.

    Args:
        table (dict): name -> {baud_gbaud, net_rate_gbps, required_osnr_db};
            defaults to configure.FORMATS

    Returns:
        dict: name -> ModulationFormat, lowest rate first
    """
    table = table or configure.FORMATS
    catalog = {}
    for name in FORMAT_ORDER:
        if name not in table:
            raise OpticalError("INVALID_PARAMS", f"format table is missing {name}")
        entry = table[name]
        catalog[name] = ModulationFormat(name=name, baud_gbaud=float(entry["baud_gbaud"]),
                                         net_rate_gbps=float(entry["net_rate_gbps"]),
                                         required_osnr_db=float(entry["required_osnr_db"]))
    ordered = list(catalog.values())
    for lower, higher in zip(ordered, ordered[1:]):
        if not (lower.net_rate_gbps < higher.net_rate_gbps and lower.required_osnr_db < higher.required_osnr_db):
            raise OpticalError("INVALID_PARAMS", f"{lower.name} must have lower rate and OSNR than {higher.name}")
    return catalog


@dataclass(frozen=True)
class ImpairmentParams:
    splitter_db: float
    blocker_db: float
    edfa_nf_db: float
    soa_nf_db: float
    osnr_constant_db: float
    launch_power_dbm: float

    @classmethod
    def from_config(cls, overrides=None):
        values = dict(configure.IMPAIRMENTS)
        values.update(overrides or {})
        return cls(**{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class OpticalPath:
    hops: tuple
    spans: tuple
    total_length_km: float

    def to_dict(self):
        return {"hops": list(self.hops), "spans": [s.id for s in self.spans],
                "total_length_km": self.total_length_km}


@dataclass(frozen=True)
class FeasibilityReport:
    total_loss_db: float
    osnr_db: float
    required_osnr_db: float
    feasible: bool
    stage_osnr_db: tuple = ()

    def to_dict(self):
        return {
            "total_loss_db": round(self.total_loss_db, 6),
            "osnr_db": self.osnr_db if math.isinf(self.osnr_db) else round(self.osnr_db, 6),
            "required_osnr_db": self.required_osnr_db,
            "feasible": self.feasible,
            "stage_osnr_db": [round(x, 6) for x in self.stage_osnr_db],
        }


class ChannelState(str, Enum):
    ACTIVE = "ACTIVE"
    RELEASED = "RELEASED"


class BlockerAction(str, Enum):
    PASS = "PASS"
    BLOCK = "BLOCK"


@dataclass(frozen=True)
class BlockerRule:
    node: str
    channel_index: int
    action: BlockerAction

    def to_dict(self):
        return {"node": self.node, "channel_index": self.channel_index, "action": self.action.value}


@dataclass
class MediaChannel:
    id: str
    path: OpticalPath
    channel_index: int
    format: ModulationFormat
    state: ChannelState
    report: FeasibilityReport
    launch_power_dbm: float
    segments: tuple = ()
    src_slot: int = None
    dst_slot: int = None

    @property
    def src(self):
        return self.path.hops[0]

    @property
    def dst(self):
        return self.path.hops[-1]

    def to_dict(self):
        return {
            "id": self.id,
            "path": self.path.to_dict(),
            "channel_index": self.channel_index,
            "format": self.format.name,
            "state": self.state.value,
            "report": self.report.to_dict(),
            "launch_power_dbm": self.launch_power_dbm,
            "segments": list(self.segments),
        }


class SpectrumState:
    """Occupied channel indices per broadcast segment."""

    def __init__(self, segments, channel_count):
        self.channel_count = channel_count
        self.occupancy = {seg.index: set() for seg in segments}

    def occupy(self, segment_indices, channel_index):
        for s in segment_indices:
            if channel_index in self.occupancy[s]:
                raise OpticalError("INTERNAL_ERROR", f"channel {channel_index} already busy on segment {s}")
            self.occupancy[s].add(channel_index)

    def free(self, segment_indices, channel_index):
        for s in segment_indices:
            self.occupancy[s].discard(channel_index)

    def utilization(self):
        slots = len(self.occupancy) * self.channel_count
        return sum(len(v) for v in self.occupancy.values()) / slots if slots else 0.0

    def snapshot(self):
        return {str(s): sorted(busy) for s, busy in sorted(self.occupancy.items())}


def route_path(topo, src, dst):
    """
    The unique simple path between two nodes of the horseshoe.

    Raises:
        OpticalError: SAME_ENDPOINT, NO_PATH; TopologyError UNKNOWN_NODE
    """
    topo.node(src)
    topo.node(dst)
    if src == dst:
        raise OpticalError("SAME_ENDPOINT", f"source and destination are both {src}", {"node": src})

    g = topo.graph()
    g.remove_edges_from([(s.a, s.z) for s in topo.spans if not s.operational])
    try:
        hops = nx.shortest_path(g, src, dst, weight="length_km")
    except nx.NetworkXNoPath:
        down = [s.id for s in topo.spans if not s.operational]
        raise OpticalError("NO_PATH", f"no operational path from {src} to {dst}",
                           {"src": src, "dst": dst, "down_spans": down})

    spans = tuple(topo.span_between(u, v) for u, v in zip(hops, hops[1:]))
    return OpticalPath(hops=tuple(hops), spans=spans, total_length_km=sum(s.length_km for s in spans))


def _stage_budget(topo, path, params):
    """Loss and noise figure of each amplified stage (span + receiving node)."""
    losses, noise_figures = [], []
    for span, node_id in zip(path.spans, path.hops[1:]):
        node = topo.node(node_id)
        if node.amp_variant == AmpVariant.SOA_LOSSLESS:
            node_loss, nf = 0.0, params.soa_nf_db
        else:
            node_loss = params.splitter_db + (params.blocker_db if node.has_blocker else 0.0)
            nf = params.edfa_nf_db
        losses.append(span.loss_db + node_loss)
        noise_figures.append(nf)
    return np.array(losses, dtype=float), np.array(noise_figures, dtype=float)


def evaluate_feasibility(topo, path, fmt, launch_power_dbm=None, params=None):
    """
    Analytic loss/OSNR budget of a path for one modulation format.

    Each span followed by the receiving node's insertion loss forms one stage,
    terminated by that node's amplifier. Stage OSNR in dB is
    C + (P_launch - L_stage) - NF; stages combine as a reciprocal sum in linear
    units. A path without spans has no impairment and reports +inf.

    Returns:
        FeasibilityReport
    """
    params = params or ImpairmentParams.from_config()
    power = params.launch_power_dbm if launch_power_dbm is None else launch_power_dbm
    losses, nfs = _stage_budget(topo, path, params)

    if losses.size == 0:
        return FeasibilityReport(total_loss_db=0.0, osnr_db=math.inf,
                                 required_osnr_db=fmt.required_osnr_db, feasible=True)

    stage_osnr = params.osnr_constant_db + (power - losses) - nfs
    osnr = float(-10.0 * np.log10(np.sum(10.0 ** (-stage_osnr / 10.0))))
    return FeasibilityReport(
        total_loss_db=float(losses.sum()),
        osnr_db=osnr,
        required_osnr_db=fmt.required_osnr_db,
        feasible=osnr >= fmt.required_osnr_db,
        stage_osnr_db=tuple(float(x) for x in stage_osnr),
    )


def assign_channel(state, segments_touched):
    """
    First-fit: lowest channel index free on every touched segment.

    Args:
        state (SpectrumState): Current occupancy, not modified
        segments_touched: Segments (or segment indices) the path crosses

    Returns:
        int: Channel index
    """
    indices = [getattr(s, "index", s) for s in segments_touched]
    if not indices:
        raise ValueError("assign_channel needs at least one segment")
    busy = set().union(*(state.occupancy[i] for i in indices))
    for channel in range(state.channel_count):
        if channel not in busy:
            return channel
    raise OpticalError("OPTICAL_BLOCKED", "no channel free on every touched segment",
                       {"segments": sorted(indices), "channel_count": state.channel_count})


def configure_blockers(topo, path, channel_index):
    """
    Wavelength blocker rules confining one channel's broadcast.

    PASS at every blocker-equipped interior node of the path, BLOCK at the first
    blocker-equipped node beyond each end of the path. Rules come back in line
    order.
    """
    if len(path.hops) < 2:
        return []
    positions = sorted(topo.position(h) for h in path.hops)
    lo, hi = positions[0], positions[-1]
    rules = []

    for p in range(lo - 1, -1, -1):
        if topo.node(topo.line[p]).has_blocker:
            rules.append(BlockerRule(topo.line[p], channel_index, BlockerAction.BLOCK))
            break
    for p in positions[1:-1]:
        if topo.node(topo.line[p]).has_blocker:
            rules.append(BlockerRule(topo.line[p], channel_index, BlockerAction.PASS))
    for p in range(hi + 1, len(topo.line)):
        if topo.node(topo.line[p]).has_blocker:
            rules.append(BlockerRule(topo.line[p], channel_index, BlockerAction.BLOCK))
            break
    return rules


class OpticalNetwork:
    """Mutable optical state of one topology: spectrum, channels, blocker rules."""

    def __init__(self, topo, params=None, formats=None):
        self.topo = topo
        self.params = params or ImpairmentParams.from_config()
        self.formats = formats or load_format_catalog()
        self.segments = broadcast_segments(topo)
        self._segment_of_span = {sid: seg.index for seg in self.segments for sid in seg.span_ids}
        self.spectrum = SpectrumState(self.segments, topo.grid.channel_count)
        self.channels = {}
        self.blocker_rules = {}
        self._counter = 0
        self._routes = {}
        self._reports = {}

    def get_format(self, fmt):
        if isinstance(fmt, ModulationFormat):
            return fmt
        try:
            return self.formats[fmt]
        except KeyError:
            raise OpticalError("UNSUPPORTED_FORMAT", f"unknown modulation format {fmt}", {"format": fmt})

    def route(self, src, dst):
        key = (src, dst)
        if key not in self._routes:
            self._routes[key] = route_path(self.topo, src, dst)
        return self._routes[key]

    def feasibility(self, path, fmt, launch_power_dbm=None):
        power = self.params.launch_power_dbm if launch_power_dbm is None else launch_power_dbm
        key = (path.hops, fmt.name, power)
        if key not in self._reports:
            self._reports[key] = evaluate_feasibility(self.topo, path, fmt, power, self.params)
        return self._reports[key]

    def segments_touched(self, path):
        return tuple(sorted({self._segment_of_span[s.id] for s in path.spans}))

    def endpoint_formats(self, node_id, slot=None):
        node = self.topo.node(node_id)
        if slot is not None and not 0 <= slot < len(node.slots):
            raise OpticalError("UNSUPPORTED_FORMAT", f"{node_id} has no transponder slot {slot}",
                               {"node": node_id, "slot": slot})
        return node.supported_formats(slot)

    def _check_format(self, fmt, src, dst, src_slot, dst_slot):
        for node_id, slot in ((src, src_slot), (dst, dst_slot)):
            if fmt.name not in self.endpoint_formats(node_id, slot):
                raise OpticalError("UNSUPPORTED_FORMAT", f"{node_id} has no transponder for {fmt.name}",
                                   {"node": node_id, "format": fmt.name})

    def best_feasible_format(self, src, dst, launch_power_dbm=None, src_slot=None, dst_slot=None):
        """Highest-rate format both ends support and the path can carry."""
        path = self.route(src, dst)
        common = self.endpoint_formats(src, src_slot) & self.endpoint_formats(dst, dst_slot)
        candidates = [f for f in reversed(list(self.formats.values())) if f.name in common]
        if not candidates:
            raise OpticalError("UNSUPPORTED_FORMAT", f"no common format between {src} and {dst}",
                               {"src": src, "dst": dst})
        report = None
        for fmt in candidates:
            report = self.feasibility(path, fmt, launch_power_dbm)
            if report.feasible:
                return fmt
        raise OpticalError("INFEASIBLE_OSNR", f"no format is feasible from {src} to {dst}",
                           {"report": report.to_dict()})

    def provision_media_channel(self, src, dst, fmt, launch_power_dbm=None, src_slot=None, dst_slot=None):
        """
        Route, check and light a media channel between two nodes.

        All checks run before any state changes, so a failure leaves the
        network untouched.

        Returns:
            MediaChannel: The ACTIVE channel
        """
        fmt = self.get_format(fmt)
        power = self.params.launch_power_dbm if launch_power_dbm is None else launch_power_dbm
        path = self.route(src, dst)
        self._check_format(fmt, src, dst, src_slot, dst_slot)

        report = self.feasibility(path, fmt, power)
        if not report.feasible:
            raise OpticalError("INFEASIBLE_OSNR",
                               f"OSNR {report.osnr_db:.2f} dB below {fmt.required_osnr_db} dB for {fmt.name}",
                               {"report": report.to_dict()})

        touched = self.segments_touched(path)
        index = assign_channel(self.spectrum, touched)

        self.spectrum.occupy(touched, index)
        self._counter += 1
        channel = MediaChannel(id=generate_sequence_id("mc", self._counter), path=path, channel_index=index,
                               format=fmt, state=ChannelState.ACTIVE, report=report, launch_power_dbm=power,
                               segments=touched, src_slot=src_slot, dst_slot=dst_slot)
        self.channels[channel.id] = channel
        self.blocker_rules[channel.id] = configure_blockers(self.topo, path, index)
        logger.debug("✅ %s %s->%s ch%d %s", channel.id, src, dst, index, fmt.name)
        return channel

    def _get_channel(self, channel_id):
        try:
            return self.channels[channel_id]
        except KeyError:
            raise OpticalError("UNKNOWN_CHANNEL", f"media channel {channel_id} does not exist",
                               {"channel": channel_id})

    def release_media_channel(self, channel_id):
        channel = self._get_channel(channel_id)
        if channel.state == ChannelState.RELEASED:
            raise OpticalError("ALREADY_RELEASED", f"media channel {channel_id} is already released",
                               {"channel": channel_id})
        self.spectrum.free(channel.segments, channel.channel_index)
        self.blocker_rules.pop(channel_id, None)
        channel.state = ChannelState.RELEASED
        logger.debug("🔓 released %s ch%d", channel_id, channel.channel_index)
        return channel

    def discard_media_channel(self, channel_id):
        """Undo a provision completely (rollback of an enclosing transaction)."""
        channel = self._get_channel(channel_id)
        if channel.state == ChannelState.ACTIVE:
            self.release_media_channel(channel_id)
        del self.channels[channel_id]

    def active_channels(self):
        return [c for c in self.channels.values() if c.state == ChannelState.ACTIVE]

    def rules_for(self, channel_id):
        return list(self.blocker_rules.get(channel_id, []))

    def spectrum_utilization(self):
        return self.spectrum.utilization()

    def snapshot(self):
        return {
            "occupancy": self.spectrum.snapshot(),
            "blocker_rules": {cid: [r.to_dict() for r in rules] for cid, rules in sorted(self.blocker_rules.items())},
            "active_channels": {c.id: c.to_dict() for c in sorted(self.active_channels(), key=lambda c: c.id)},
        }
