# topology.py
"""
Metro horseshoe network model.

A topology is a simple path of fiber spans whose two ends are metro core edge
nodes (MCEN); access metro edge nodes (AMEN) sit along the line. Nodes may host
a data center and carry transponders; every node may be equipped with a
wavelength blocker that splits the filterless broadcast into segments.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property

import networkx as nx

import configure
from errors import TopologyError

logger = logging.getLogger("topology")


class NodeKind(str, Enum):
    AMEN = "AMEN"
    MCEN = "MCEN"


class AmpVariant(str, Enum):
    EDFA = "EDFA"
    SOA_LOSSLESS = "SOA_LOSSLESS"


class DcTier(str, Enum):
    EDC = "EDC"
    RDC = "RDC"
    CDC = "CDC"


class Vendor(str, Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class DataCenter:
    tier: DcTier
    cpu_cores: int
    ram_gb: int
    storage_tb: float


@dataclass(frozen=True)
class TransponderType:
    vendor: Vendor
    wavelengths: int
    formats: frozenset
    openconfig_native: bool


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    amp_variant: AmpVariant = AmpVariant.EDFA
    has_blocker: bool = True
    dc: DataCenter = None
    transponders: tuple = ()

    @property
    def slots(self):
        """One entry per independently tunable wavelength (vendor A has two)."""
        return tuple(t for t in self.transponders for _ in range(t.wavelengths))

    def supported_formats(self, slot=None):
        if slot is not None:
            return self.slots[slot].formats
        formats = set()
        for transponder in self.transponders:
            formats |= transponder.formats
        return frozenset(formats)


@dataclass(frozen=True)
class FiberSpan:
    id: str
    a: str
    z: str
    length_km: float
    loss_coeff_db_per_km: float = configure.DEFAULT_LOSS_DB_PER_KM
    operational: bool = True

    @property
    def loss_db(self):
        return self.length_km * self.loss_coeff_db_per_km

    def other_end(self, node_id):
        return self.z if node_id == self.a else self.a


@dataclass(frozen=True)
class SpectrumGrid:
    channel_count: int
    channel_spacing_ghz: float
    base_frequency_thz: float

    def frequency_thz(self, channel_index):
        return round(self.base_frequency_thz + self.channel_spacing_ghz / 1000.0 * channel_index, 6)


@dataclass(frozen=True)
class Segment:
    """A maximal run of spans sharing one filterless broadcast domain."""
    index: int
    span_ids: tuple


@dataclass(frozen=True)
class Topology:
    nodes: tuple
    spans: tuple  # in line order
    grid: SpectrumGrid
    line: tuple  # node ids from one MCEN to the other
    warnings: tuple = field(default=(), compare=False)

    @cached_property
    def _node_index(self):
        return {node.id: node for node in self.nodes}

    @cached_property
    def _position(self):
        return {node_id: i for i, node_id in enumerate(self.line)}

    def has_node(self, node_id):
        return node_id in self._node_index

    def node(self, node_id):
        try:
            return self._node_index[node_id]
        except KeyError:
            raise TopologyError("UNKNOWN_NODE", f"node {node_id} does not exist", {"node": node_id})

    def position(self, node_id):
        self.node(node_id)
        return self._position[node_id]

    def span_between(self, u, v):
        """Span joining two adjacent nodes, or None."""
        pu, pv = self._position.get(u), self._position.get(v)
        if pu is None or pv is None or abs(pu - pv) != 1:
            return None
        return self.spans[min(pu, pv)]

    @property
    def mcens(self):
        return [n for n in self.nodes if n.kind == NodeKind.MCEN]

    @property
    def amens(self):
        return [self.node(node_id) for node_id in self.line if self.node(node_id).kind == NodeKind.AMEN]

    @property
    def dc_nodes(self):
        return [n for n in self.nodes if n.dc is not None]

    def with_channel_count(self, channel_count):
        """Same topology on a truncated or widened grid."""
        if channel_count < 1:
            raise TopologyError("INVALID_TOPOLOGY", "grid needs at least one channel",
                                {"reason": "channel_count < 1"})
        return replace(self, grid=replace(self.grid, channel_count=channel_count))

    def graph(self):
        g = nx.Graph()
        for node in self.nodes:
            g.add_node(node.id, kind=node.kind.value)
        for span in self.spans:
            g.add_edge(span.a, span.z, span_id=span.id, length_km=span.length_km,
                       operational=span.operational)
        return g


NODE_FIELDS = {"id", "kind", "amp_variant", "has_blocker", "dc", "transponders"}
DC_FIELDS = {"tier", "cpu_cores", "ram_gb", "storage_tb"}
TRANSPONDER_FIELDS = {"vendor", "openconfig_native"}
SPAN_FIELDS = {"id", "a", "z", "length_km", "loss_coeff_db_per_km", "operational"}
GRID_FIELDS = {"channel_count", "channel_spacing_ghz", "base_frequency_thz"}
DOC_FIELDS = {"nodes", "spans", "grid"}


def _parse_error(message, **details):
    return TopologyError("PARSE_ERROR", message, details)


def _invalid(reason, **details):
    details["reason"] = reason
    return TopologyError("INVALID_TOPOLOGY", reason, details)


def _check_fields(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise _parse_error(f"{where} must be an object", where=where)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise _parse_error(f"unknown field(s) in {where}: {', '.join(unknown)}", where=where, fields=unknown)
    missing = sorted(set(required) - set(obj))
    if missing:
        raise _parse_error(f"missing field(s) in {where}: {', '.join(missing)}", where=where, fields=missing)


def _enum(enum_cls, value, where):
    try:
        return enum_cls(value)
    except ValueError:
        raise _parse_error(f"invalid {enum_cls.__name__} '{value}' in {where}", where=where)


def _number(value, where, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _parse_error(f"{where} must be a number", where=where)
    if integer and not isinstance(value, int):
        raise _parse_error(f"{where} must be an integer", where=where)
    return value


def _boolean(value, where):
    if not isinstance(value, bool):
        raise _parse_error(f"{where} must be a boolean", where=where)
    return value


def _string_id(value, where):
    if not isinstance(value, str):
        raise _parse_error(f"{where} must be a string", where=where)
    if not value.strip():
        raise _invalid("empty id", where=where)
    return value


def _parse_transponder(raw, where):
    _check_fields(raw, TRANSPONDER_FIELDS, {"vendor"}, where)
    vendor = _enum(Vendor, raw["vendor"], where)
    native = raw.get("openconfig_native", configure.VENDOR_OPENCONFIG_NATIVE[vendor.value])
    return TransponderType(
        vendor=vendor,
        wavelengths=configure.VENDOR_SLOTS[vendor.value],
        formats=frozenset(configure.VENDOR_FORMATS[vendor.value]),
        openconfig_native=_boolean(native, f"{where}.openconfig_native"),
    )


def _parse_dc(raw, where):
    _check_fields(raw, DC_FIELDS, DC_FIELDS, where)
    dc = DataCenter(
        tier=_enum(DcTier, raw["tier"], where),
        cpu_cores=_number(raw["cpu_cores"], f"{where}.cpu_cores", integer=True),
        ram_gb=_number(raw["ram_gb"], f"{where}.ram_gb", integer=True),
        storage_tb=float(_number(raw["storage_tb"], f"{where}.storage_tb")),
    )
    if dc.cpu_cores < 0 or dc.ram_gb < 0 or dc.storage_tb < 0:
        raise _invalid("negative data center capacity", where=where)
    return dc


def _parse_node(raw, i):
    where = f"nodes[{i}]"
    _check_fields(raw, NODE_FIELDS, {"id", "kind"}, where)
    node_id = _string_id(raw["id"], f"{where}.id")
    kind = _enum(NodeKind, raw["kind"], where)
    transponders = raw.get("transponders", [])
    if not isinstance(transponders, list):
        raise _parse_error(f"{where}.transponders must be a list", where=where)
    dc = _parse_dc(raw["dc"], f"{where}.dc") if raw.get("dc") is not None else None

    node = Node(
        id=node_id,
        kind=kind,
        amp_variant=_enum(AmpVariant, raw.get("amp_variant", "EDFA"), where),
        has_blocker=_boolean(raw.get("has_blocker", True), f"{where}.has_blocker"),
        dc=dc,
        transponders=tuple(_parse_transponder(t, f"{where}.transponders[{j}]")
                           for j, t in enumerate(transponders)),
    )
    if dc is not None:
        if dc.tier == DcTier.EDC and kind != NodeKind.AMEN:
            raise _invalid(f"EDC must attach to an AMEN, not {node_id}", node=node_id)
        if dc.tier in (DcTier.RDC, DcTier.CDC) and kind != NodeKind.MCEN:
            raise _invalid(f"{dc.tier.value} must attach to an MCEN, not {node_id}", node=node_id)
        if not node.transponders:
            raise _invalid(f"node {node_id} hosts a data center but has no transponder", node=node_id)
    return node


def _parse_span(raw, i):
    where = f"spans[{i}]"
    _check_fields(raw, SPAN_FIELDS, {"id", "a", "z", "length_km"}, where)
    span = FiberSpan(
        id=_string_id(raw["id"], f"{where}.id"),
        a=_string_id(raw["a"], f"{where}.a"),
        z=_string_id(raw["z"], f"{where}.z"),
        length_km=float(_number(raw["length_km"], f"{where}.length_km")),
        loss_coeff_db_per_km=float(_number(raw.get("loss_coeff_db_per_km", configure.DEFAULT_LOSS_DB_PER_KM),
                                           f"{where}.loss_coeff_db_per_km")),
        operational=_boolean(raw.get("operational", True), f"{where}.operational"),
    )
    if span.length_km <= 0 or span.loss_coeff_db_per_km <= 0:
        raise _invalid(f"span {span.id} needs positive length and loss coefficient", span=span.id)
    return span


def _parse_grid(raw):
    merged = dict(configure.GRID_DEFAULTS)
    if raw is not None:
        _check_fields(raw, GRID_FIELDS, set(), "grid")
        merged.update(raw)
    grid = SpectrumGrid(
        channel_count=_number(merged["channel_count"], "grid.channel_count", integer=True),
        channel_spacing_ghz=float(_number(merged["channel_spacing_ghz"], "grid.channel_spacing_ghz")),
        base_frequency_thz=float(_number(merged["base_frequency_thz"], "grid.base_frequency_thz")),
    )
    if grid.channel_count < 1:
        raise _invalid("grid.channel_count must be >= 1")
    if grid.channel_spacing_ghz <= 0:
        raise _invalid("grid.channel_spacing_ghz must be > 0")
    return grid


def _order_line(nodes, spans):
    """Check the span graph is a horseshoe and return its node order."""
    by_id = {n.id: n for n in nodes}
    g = nx.Graph()
    g.add_nodes_from(by_id)
    for span in spans:
        for end in (span.a, span.z):
            if end not in by_id:
                raise _invalid(f"span {span.id} references unknown node {end}", span=span.id, node=end)
        if span.a == span.z:
            raise _invalid(f"span {span.id} is a self loop", span=span.id)
        if g.has_edge(span.a, span.z):
            raise _invalid(f"parallel spans between {span.a} and {span.z}", span=span.id)
        g.add_edge(span.a, span.z, span=span)

    mcens = [n.id for n in nodes if n.kind == NodeKind.MCEN]
    if len(mcens) != 2:
        raise _invalid(f"expected exactly 2 MCEN nodes, found {len(mcens)}", mcens=mcens)
    if not nx.is_connected(g):
        raise _invalid("span graph is not connected")
    if g.number_of_edges() != g.number_of_nodes() - 1 or max(d for _, d in g.degree()) > 2:
        raise _invalid("span graph is not a simple path")
    ends = sorted(n for n, d in g.degree() if d == 1)
    if ends != sorted(mcens):
        raise _invalid("horseshoe endpoints must be the two MCEN nodes", ends=ends)

    line = nx.shortest_path(g, mcens[0], mcens[1])
    ordered = [g.edges[u, v]["span"] for u, v in zip(line, line[1:])]
    return tuple(line), tuple(ordered)


def load_topology(doc):
    """
    Parse and validate a JSON topology document.

    Args:
        doc (dict | str): Topology document, or its JSON text

    Returns:
        Topology: Validated, immutable topology; soft problems in .warnings
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise _parse_error(f"malformed JSON: {e}")

    _check_fields(doc, DOC_FIELDS, {"nodes", "spans"}, "document")
    if not isinstance(doc["nodes"], list) or not isinstance(doc["spans"], list):
        raise _parse_error("nodes and spans must be lists")
    if not doc["nodes"]:
        raise _invalid("topology has no nodes")

    nodes = [_parse_node(raw, i) for i, raw in enumerate(doc["nodes"])]
    spans = [_parse_span(raw, i) for i, raw in enumerate(doc["spans"])]
    grid = _parse_grid(doc.get("grid"))

    for label, ids in (("node", [n.id for n in nodes]), ("span", [s.id for s in spans])):
        seen = set()
        for item in ids:
            if item in seen:
                raise _invalid(f"duplicate {label} id {item}", id=item)
            seen.add(item)

    line, ordered_spans = _order_line(nodes, spans)

    warnings = []
    low, high = configure.SPAN_LENGTH_RANGE_KM
    for span in ordered_spans:
        if not low <= span.length_km <= high:
            msg = f"span {span.id} length {span.length_km:g} km outside typical {low:g}-{high:g} km"
            logger.warning(f"⚠️ {msg}")
            warnings.append(msg)

    topo = Topology(nodes=tuple(nodes), spans=ordered_spans, grid=grid, line=line, warnings=tuple(warnings))
    logger.info(f"✅ Loaded topology with {len(nodes)} nodes and {len(spans)} spans")
    return topo


def load_topology_file(path):
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise _parse_error(f"cannot read {path}: {e}", path=path)
    return load_topology(text)


def broadcast_segments(topo):
    """
    Split the span set into filterless broadcast segments.

    Two neighbouring spans share a segment unless the node between them carries
    a wavelength blocker.

    Returns:
        list[Segment]: Segments in line order
    """
    segments = []
    current = []
    for i, span in enumerate(topo.spans):
        if current and topo.node(topo.line[i]).has_blocker:
            segments.append(Segment(index=len(segments), span_ids=tuple(current)))
            current = []
        current.append(span.id)
    if current:
        segments.append(Segment(index=len(segments), span_ids=tuple(current)))
    return segments


def topology_summary(topo):
    """Compact description used by the validate command."""
    segments = broadcast_segments(topo)
    return {
        "nodes": len(topo.nodes),
        "spans": len(topo.spans),
        "line": list(topo.line),
        "total_length_km": sum(s.length_km for s in topo.spans),
        "amens": [n.id for n in topo.amens],
        "mcens": [n.id for n in topo.mcens],
        "data_centers": {n.id: n.dc.tier.value for n in topo.dc_nodes},
        "segments": [list(s.span_ids) for s in segments],
        "grid": {
            "channel_count": topo.grid.channel_count,
            "channel_spacing_ghz": topo.grid.channel_spacing_ghz,
            "base_frequency_thz": topo.grid.base_frequency_thz,
        },
        "warnings": list(topo.warnings),
    }
