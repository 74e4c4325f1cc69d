# workload.py
"""
Video-surveillance workload: scenario generation, the end-to-end latency model
and Monte-Carlo provisioning experiments over the COM stack.
"""

import heapq
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

import configure
from control import ComController, ServiceLayer, SipKind
from errors import NetworkError, WorkloadError
from optical import route_path
from topology import broadcast_segments
from utils import canonical_json

logger = logging.getLogger("workload")


class CameraKind(str, Enum):
    FIX = "FIX"
    THERMAL = "THERMAL"
    PTZ = "PTZ"


class FlowKind(str, Enum):
    LIVE_VIDEO = "LIVE_VIDEO"
    ARCHIVE = "ARCHIVE"
    PTZ_CONTROL = "PTZ_CONTROL"
    ANALYTICS_FEED = "ANALYTICS_FEED"


@dataclass(frozen=True)
class Camera:
    id: str
    kind: CameraKind
    attached_node: str
    stream_mbps: float

    def to_dict(self):
        return {"id": self.id, "kind": self.kind.value, "attached_node": self.attached_node,
                "stream_mbps": self.stream_mbps}


@dataclass(frozen=True)
class Flow:
    id: str
    kind: FlowKind
    src: str
    dst: str
    bandwidth_mbps: float
    max_latency_ms: float = None

    def to_dict(self):
        return {"id": self.id, "kind": self.kind.value, "src": self.src, "dst": self.dst,
                "bandwidth_mbps": self.bandwidth_mbps, "max_latency_ms": self.max_latency_ms}


@dataclass
class Scenario:
    cameras: list
    flows: list
    seed: int
    params: dict
    warnings: list = field(default_factory=list)

    def aggregate_mbps(self, node_id):
        """Live video entering the network at one AMEN."""
        return sum(f.bandwidth_mbps for f in self.flows if f.kind == FlowKind.LIVE_VIDEO and f.src == node_id)

    def cameras_at(self, node_id):
        return [c for c in self.cameras if c.attached_node == node_id]

    def cameras_frame(self):
        return pd.DataFrame([c.to_dict() for c in self.cameras],
                            columns=["id", "kind", "attached_node", "stream_mbps"])

    def to_dict(self):
        return {
            "seed": self.seed,
            "params": self.params,
            "cameras": [c.to_dict() for c in self.cameras],
            "flows": [f.to_dict() for f in self.flows],
            "warnings": list(self.warnings),
        }

    def to_json(self):
        return canonical_json(self.to_dict())


@dataclass(frozen=True)
class LatencyParams:
    propagation_us_per_km: float
    per_node_switching_us: float
    vnf_processing_ms: dict

    @classmethod
    def from_config(cls):
        values = configure.LATENCY
        return cls(float(values["propagation_us_per_km"]), float(values["per_node_switching_us"]),
                   dict(values["vnf_processing_ms"]))

    def __post_init__(self):
        if (self.propagation_us_per_km < 0 or self.per_node_switching_us < 0
                or any(v < 0 for v in self.vnf_processing_ms.values())):
            raise WorkloadError("INVALID_PARAMS", "latency parameters must be non-negative")


def generate_scenario(topo, cameras_per_amen, ptz_fraction, stream_mbps=None, seed=0,
                      thermal_fraction=None, archive_streams_per_amen=None):
    """
    Camera fleet and flows for every AMEN of the topology.

    Args:
        topo (Topology): Network; cameras attach to its AMENs
        cameras_per_amen (int): Cameras per recording server (one per AMEN)
        ptz_fraction (float): Share of PTZ cameras, 0..1
        stream_mbps (float): Live stream rate per camera
        seed (int): RNG seed

    Returns:
        Scenario
    """
    stream_mbps = configure.WORKLOAD["stream_mbps"] if stream_mbps is None else stream_mbps
    thermal_fraction = configure.WORKLOAD["thermal_fraction"] if thermal_fraction is None else thermal_fraction
    if archive_streams_per_amen is None:
        archive_streams_per_amen = configure.WORKLOAD["archive_streams_per_amen"]

    if isinstance(cameras_per_amen, bool) or not isinstance(cameras_per_amen, int) or cameras_per_amen < 0:
        raise WorkloadError("INVALID_PARAMS", "cameras_per_amen must be a non-negative integer",
                            {"cameras_per_amen": cameras_per_amen})
    if not 0.0 <= ptz_fraction <= 1.0 or not 0.0 <= thermal_fraction <= 1.0:
        raise WorkloadError("INVALID_PARAMS", "fractions must lie in [0, 1]",
                            {"ptz_fraction": ptz_fraction, "thermal_fraction": thermal_fraction})
    if stream_mbps <= 0 or archive_streams_per_amen < 0:
        raise WorkloadError("INVALID_PARAMS", "stream_mbps must be > 0", {"stream_mbps": stream_mbps})

    warnings = []
    low, high = configure.WORKLOAD["cameras_per_server_range"]
    if not low <= cameras_per_amen <= high:
        msg = f"cameras_per_amen {cameras_per_amen} outside the typical {low}-{high} per server"
        logger.warning(f"⚠️ {msg}")
        warnings.append(msg)

    rng = np.random.default_rng(seed)
    cameras, flows = [], []
    ptz_mbps = configure.WORKLOAD["ptz_control_mbps"]
    ptz_latency = configure.WORKLOAD["ptz_max_latency_ms"]
    archive_mbps = configure.WORKLOAD["archive_mbps_per_stream"]

    for amen in topo.amens:
        if cameras_per_amen == 0:
            continue
        n_ptz = int(round(ptz_fraction * cameras_per_amen))
        ptz_slots = set(rng.permutation(cameras_per_amen)[:n_ptz].tolist())
        thermal_draws = rng.random(cameras_per_amen)
        for i in range(cameras_per_amen):
            if i in ptz_slots:
                kind = CameraKind.PTZ
            elif thermal_draws[i] < thermal_fraction:
                kind = CameraKind.THERMAL
            else:
                kind = CameraKind.FIX
            cam = Camera(f"cam-{amen.id}-{i:03d}", kind, amen.id, float(stream_mbps))
            cameras.append(cam)
            flows.append(Flow(f"live-{cam.id}", FlowKind.LIVE_VIDEO, amen.id, "CSS", float(stream_mbps)))
            if kind == CameraKind.PTZ:
                flows.append(Flow(f"ptz-{cam.id}", FlowKind.PTZ_CONTROL, "ANALYTICS", amen.id,
                                  ptz_mbps, ptz_latency))
        aggregate = cameras_per_amen * float(stream_mbps)
        flows.append(Flow(f"feed-{amen.id}", FlowKind.ANALYTICS_FEED, amen.id, "ANALYTICS", aggregate))
        if archive_streams_per_amen:
            flows.append(Flow(f"archive-{amen.id}", FlowKind.ARCHIVE, amen.id, "CSM",
                              archive_streams_per_amen * archive_mbps))

    params = {"cameras_per_amen": cameras_per_amen, "ptz_fraction": ptz_fraction, "stream_mbps": stream_mbps,
              "thermal_fraction": thermal_fraction, "archive_streams_per_amen": archive_streams_per_amen}
    logger.info(f"📹 Generated {len(cameras)} cameras and {len(flows)} flows (seed {seed})")
    return Scenario(cameras=cameras, flows=flows, seed=seed, params=params, warnings=warnings)


def compute_latency(topo, path_nodes, params=None, processing=()):
    """
    One-way latency of a node path in milliseconds.

    Propagation over every span, switching at every interior node and the
    processing time of each VNF kind traversed.
    """
    params = params or LatencyParams.from_config()
    nodes = list(path_nodes)
    for node_id in nodes:
        topo.node(node_id)

    km = 0.0
    for u, v in zip(nodes, nodes[1:]):
        span = topo.span_between(u, v)
        if span is None or not span.operational:
            raise WorkloadError("NO_PATH", f"no operational span between {u} and {v}", {"a": u, "z": v})
        km += span.length_km

    interior = max(len(nodes) - 2, 0)
    micros = km * params.propagation_us_per_km + interior * params.per_node_switching_us
    processing_ms = sum(params.vnf_processing_ms.get(getattr(k, "value", k), 0.0) for k in processing)
    return micros / 1000.0 + processing_ms


def erlang_b(servers, load):
    """Blocking of an M/M/c/c loss system, by the standard recursion."""
    b = 1.0
    for n in range(1, servers + 1):
        b = load * b / (n + load * b)
    return b


@dataclass
class Metrics:
    seed: int
    offered_requests: int
    accepted: int
    blocked: int
    blocking_probability: float
    blocking_stderr: float
    blocked_by_cause: dict
    latency_histogram: list
    mean_latency_ms: float
    p50_latency_ms: float
    p95_latency_ms: float
    p99_latency_ms: float
    spectrum_utilization: float
    offered_load_erlang: float
    erlang_b_reference: float = None

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self):
        return canonical_json(self.to_dict())

    def histogram_frame(self):
        return pd.DataFrame(self.latency_histogram, columns=["bucket_ms_low", "bucket_ms_high", "count"])

    def write_histogram_csv(self, path):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.histogram_frame().to_csv(path, index=False)
        logger.info(f"✅ Latency histogram written to {path}")


def _trunk_pairs(com):
    """AMEN-to-MCEN aggregate trunks; MCEN-to-MCEN when the line has no AMEN."""
    topo = com.topo

    def sip_for(node_id):
        sips = com.domain.sips_at(node_id)
        dc = [s for s in sips if s.kind == SipKind.DC_PORT]
        return (dc or sips or [None])[0]

    if topo.amens:
        pairs = [(sip_for(a.id), sip_for(m.id)) for a in topo.amens for m in topo.mcens]
    else:
        pairs = [(sip_for(topo.line[0]), sip_for(topo.line[-1]))]
    return [(a, z) for a, z in pairs if a is not None and z is not None]


def _histogram(latencies, width):
    if not latencies:
        return []
    top = max(latencies)
    edges = width * np.arange(0, int(np.floor(top / width)) + 2)
    counts, edges = np.histogram(latencies, bins=edges)
    return [{"bucket_ms_low": round(float(lo), 9), "bucket_ms_high": round(float(hi), 9), "count": int(c)}
            for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


def run_experiment(topo, arrival_rate_per_s, mean_hold_s, requests=None, duration_s=None, seed=0,
                   demand_distribution=None, latency_params=None):
    """
    Dynamic provisioning study with Poisson arrivals and exponential holding.

    Every arrival asks the COM stack for an OPTICAL service on a random
    AMEN-to-MCEN trunk; blocked requests are counted and dropped. Arrivals,
    holding times, endpoints and demands draw from separate child streams of
    one seed.

    Args:
        topo (Topology): Network under study
        arrival_rate_per_s (float): Poisson arrival rate
        mean_hold_s (float): Mean holding time
        requests (int): Stop after this many arrivals
        duration_s (float): Or stop at this simulated time
        seed (int): RNG seed
        demand_distribution (dict): format name (or "auto") -> weight

    Returns:
        Metrics
    """
    if arrival_rate_per_s <= 0 or mean_hold_s <= 0:
        raise WorkloadError("INVALID_PARAMS", "arrival rate and holding time must be > 0",
                            {"arrival_rate_per_s": arrival_rate_per_s, "mean_hold_s": mean_hold_s})
    if (requests is None) == (duration_s is None) or (requests or duration_s) <= 0:
        raise WorkloadError("INVALID_PARAMS", "give exactly one of a positive request count or duration")

    demand_distribution = demand_distribution or {"auto": 1.0}
    demand_names = sorted(demand_distribution)
    weights = np.array([demand_distribution[k] for k in demand_names], dtype=float)
    if np.any(weights < 0) or weights.sum() <= 0:
        raise WorkloadError("INVALID_PARAMS", "demand weights must be non-negative with a positive sum")
    weights = weights / weights.sum()

    latency_params = latency_params or LatencyParams.from_config()
    com = ComController(topo)
    pairs = _trunk_pairs(com)
    if not pairs:
        raise WorkloadError("INVALID_PARAMS", "topology exposes no SIPs to load")

    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]
    arrival_rng, hold_rng, endpoint_rng, demand_rng = streams
    mean_interarrival = 1.0 / arrival_rate_per_s
    slots = len(com.optical.segments) * topo.grid.channel_count
    occupancy = com.optical.spectrum.occupancy

    departures = []
    outcomes = []
    latencies = []
    causes = Counter()
    clock = last = busy_area = 0.0
    sequence = 0

    def advance(t):
        nonlocal last, busy_area
        busy_area += sum(len(v) for v in occupancy.values()) * (t - last)
        last = t

    logger.info(f"🚦 Experiment: {arrival_rate_per_s}/s x {mean_hold_s}s, seed {seed}")
    while True:
        clock += arrival_rng.exponential(mean_interarrival)
        if duration_s is not None and clock > duration_s:
            break
        while departures and departures[0][0] <= clock:
            t_dep, _, service_id = heapq.heappop(departures)
            advance(t_dep)
            com.delete_connectivity_service(service_id)
            com.purge_service(service_id)
        advance(clock)

        hold = hold_rng.exponential(mean_hold_s)
        sip_a, sip_z = pairs[int(endpoint_rng.integers(len(pairs)))]
        demand = demand_names[int(demand_rng.choice(len(demand_names), p=weights))]
        try:
            svc = com.create_connectivity_service(sip_a.id, sip_z.id, ServiceLayer.OPTICAL,
                                                  format_hint=None if demand == "auto" else demand)
        except NetworkError as e:
            outcomes.append(False)
            causes[e.code] += 1
            if e.details.get("service") in com.services:
                com.purge_service(e.details["service"])
        else:
            outcomes.append(True)
            channel = com.optical.channels[svc.underlying]
            latencies.append(compute_latency(topo, channel.path.hops, latency_params))
            sequence += 1
            heapq.heappush(departures, (clock + hold, sequence, svc.id))

        if requests is not None and len(outcomes) >= requests:
            break

    offered = len(outcomes)
    blocked = offered - sum(outcomes)
    blocking = blocked / offered if offered else 0.0
    batches = np.array_split(~np.array(outcomes, dtype=bool), min(configure.EXPERIMENT["batches"], max(offered, 1)))
    batch_means = np.array([b.mean() for b in batches if b.size])
    stderr = float(batch_means.std(ddof=1) / np.sqrt(batch_means.size)) if batch_means.size > 1 else 0.0

    lat = np.array(latencies, dtype=float)
    pct = np.percentile(lat, [50, 95, 99]).tolist() if lat.size else [0.0, 0.0, 0.0]
    load = arrival_rate_per_s * mean_hold_s
    single_segment = len(broadcast_segments(topo)) == 1

    metrics = Metrics(
        seed=seed,
        offered_requests=offered,
        accepted=offered - blocked,
        blocked=blocked,
        blocking_probability=blocking,
        blocking_stderr=stderr,
        blocked_by_cause=dict(sorted(causes.items())),
        latency_histogram=_histogram(latencies, configure.EXPERIMENT["histogram_bucket_ms"]),
        mean_latency_ms=float(lat.mean()) if lat.size else 0.0,
        p50_latency_ms=float(pct[0]),
        p95_latency_ms=float(pct[1]),
        p99_latency_ms=float(pct[2]),
        spectrum_utilization=busy_area / (last * slots) if last > 0 and slots else 0.0,
        offered_load_erlang=load,
        erlang_b_reference=erlang_b(topo.grid.channel_count, load) if single_segment else None,
    )
    logger.info(f"✅ Experiment done: {offered} offered, blocking {blocking:.4f}")
    return metrics


def path_latency(topo, src, dst, params=None):
    """Latency between two nodes along the horseshoe (0 when co-located)."""
    if src == dst:
        return 0.0
    return compute_latency(topo, route_path(topo, src, dst).hops, params)
