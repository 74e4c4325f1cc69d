# nfv.py
"""
NFV orchestration for the surveillance application.

VNF descriptors and network service descriptors (NSD), per data center VIM
accounting, latency/bandwidth aware placement (exact branch-and-bound for small
instances, greedy above that) and all-or-nothing slice instantiation through
the WIM, which is the COM controller's L3 service.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import configure
from control import ComController, ServiceLayer, ServiceState, SipKind
from errors import NetworkError, PlacementError, ServiceError
from optical import route_path
from topology import DcTier
from workload import LatencyParams, compute_latency, path_latency

logger = logging.getLogger("nfv")

CAMERA_PREFIX = "CAMERA_SOURCE@"
COST_EPSILON = 1e-9
INJECTION_POINTS = ("before_placement", "after_placement", "vim_reserved",
                    "before_wim_service", "after_wim_service", "before_activate")


class VnfKind(str, Enum):
    CSM = "CSM"
    CSS = "CSS"
    DM = "DM"
    ANALYTICS = "ANALYTICS"
    STORAGE_DB = "STORAGE_DB"
    NAT = "NAT"
    FIREWALL = "FIREWALL"
    ACCOUNTING = "ACCOUNTING"


@dataclass(frozen=True)
class VnfDescriptor:
    name: str
    kind: VnfKind
    cpu_cores: int
    ram_gb: int
    storage_tb: float
    allowed_tiers: frozenset
    pin_node: str = None

    @property
    def demand(self):
        return (self.cpu_cores, self.ram_gb, self.storage_tb)

    def to_dict(self):
        return {"name": self.name, "kind": self.kind.value, "cpu_cores": self.cpu_cores, "ram_gb": self.ram_gb,
                "storage_tb": self.storage_tb, "allowed_tiers": sorted(t.value for t in self.allowed_tiers),
                "pin_node": self.pin_node}


@dataclass(frozen=True)
class VirtualLink:
    from_vnf: str
    to_vnf: str
    bandwidth_gbps: float
    max_latency_ms: float = None

    def to_dict(self):
        return {"from_vnf": self.from_vnf, "to_vnf": self.to_vnf, "bandwidth_gbps": self.bandwidth_gbps,
                "max_latency_ms": self.max_latency_ms}


@dataclass(frozen=True)
class NetworkServiceDescriptor:
    vnfs: tuple
    links: tuple

    def vnf(self, name):
        return next(v for v in self.vnfs if v.name == name)

    def to_dict(self):
        return {"vnfs": [v.to_dict() for v in self.vnfs], "links": [l.to_dict() for l in self.links]}


def camera_node(endpoint):
    return endpoint[len(CAMERA_PREFIX):] if endpoint.startswith(CAMERA_PREFIX) else None


def _invalid_nsd(message, **details):
    return PlacementError("INVALID_NSD", message, details)


def load_nsd(doc):
    """
    Parse an NSD document {"vnfs": [...], "links": [...]}.

    Returns:
        NetworkServiceDescriptor
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise _invalid_nsd(f"malformed JSON: {e}")
    if not isinstance(doc, dict) or set(doc) - {"vnfs", "links"} or not isinstance(doc.get("vnfs"), list):
        raise _invalid_nsd("an NSD is an object with a vnfs list and an optional links list")

    vnfs = []
    for i, raw in enumerate(doc["vnfs"]):
        try:
            unknown = set(raw) - {"name", "kind", "cpu_cores", "ram_gb", "storage_tb", "allowed_tiers", "pin_node"}
            if unknown:
                raise _invalid_nsd(f"unknown field(s) in vnfs[{i}]: {sorted(unknown)}")
            vnfs.append(VnfDescriptor(
                name=str(raw["name"]),
                kind=VnfKind(raw["kind"]),
                cpu_cores=int(raw["cpu_cores"]),
                ram_gb=int(raw["ram_gb"]),
                storage_tb=float(raw.get("storage_tb", 0.0)),
                allowed_tiers=frozenset(DcTier(t) for t in raw["allowed_tiers"]),
                pin_node=raw.get("pin_node"),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise _invalid_nsd(f"bad vnfs[{i}]: {e}", index=i)

    links = []
    for i, raw in enumerate(doc.get("links", [])):
        try:
            unknown = set(raw) - {"from_vnf", "to_vnf", "bandwidth_gbps", "max_latency_ms"}
            if unknown:
                raise _invalid_nsd(f"unknown field(s) in links[{i}]: {sorted(unknown)}")
            bound = raw.get("max_latency_ms")
            links.append(VirtualLink(str(raw["from_vnf"]), str(raw["to_vnf"]), float(raw["bandwidth_gbps"]),
                                     None if bound is None else float(bound)))
        except (KeyError, TypeError, ValueError) as e:
            raise _invalid_nsd(f"bad links[{i}]: {e}", index=i)

    nsd = NetworkServiceDescriptor(tuple(vnfs), tuple(links))
    check_nsd(nsd)
    return nsd


def check_nsd(nsd, topo=None):
    """Structural checks; with a topology also pins and camera anchors."""
    names = [v.name for v in nsd.vnfs]
    if not names:
        raise _invalid_nsd("NSD has no VNFs")
    if len(set(names)) != len(names):
        raise _invalid_nsd("duplicate VNF names", names=sorted(names))
    for v in nsd.vnfs:
        if v.cpu_cores <= 0 or v.ram_gb <= 0 or v.storage_tb < 0:
            raise _invalid_nsd(f"{v.name} needs cpu_cores > 0, ram_gb > 0, storage_tb >= 0", vnf=v.name)
        if not v.allowed_tiers:
            raise _invalid_nsd(f"{v.name} allows no data center tier", vnf=v.name)
        if topo is not None and v.pin_node is not None and not topo.has_node(v.pin_node):
            raise _invalid_nsd(f"{v.name} is pinned to unknown node {v.pin_node}", vnf=v.name)
    for link in nsd.links:
        for end in (link.from_vnf, link.to_vnf):
            anchor = camera_node(end)
            if anchor is None and end not in names:
                raise _invalid_nsd(f"link endpoint {end} is not a VNF of the NSD", endpoint=end)
            if anchor is not None and topo is not None and not topo.has_node(anchor):
                raise _invalid_nsd(f"camera source at unknown node {anchor}", endpoint=end)
        if link.bandwidth_gbps <= 0 or (link.max_latency_ms is not None and link.max_latency_ms <= 0):
            raise _invalid_nsd(f"link {link.from_vnf}->{link.to_vnf} needs positive bandwidth and bound")


class VimState:
    """Compute, memory and storage accounting of one data center."""

    def __init__(self, node, dc):
        self.node = node
        self.tier = dc.tier
        self.capacity = (dc.cpu_cores, dc.ram_gb, dc.storage_tb)
        self.free_cpu, self.free_ram, self.free_storage = self.capacity
        self.reservations = {}

    @property
    def free(self):
        return (self.free_cpu, self.free_ram, self.free_storage)

    def can_host(self, demand):
        return all(d <= f + COST_EPSILON for d, f in zip(demand, self.free))

    def reserve(self, slice_id, demand):
        if not self.can_host(demand):
            raise PlacementError("CAPACITY_EXCEEDED", f"{self.node} cannot host {demand}",
                                 {"node": self.node, "free": list(self.free)})
        held = self.reservations.get(slice_id, (0, 0, 0.0))
        self.reservations[slice_id] = tuple(h + d for h, d in zip(held, demand))
        self.free_cpu -= demand[0]
        self.free_ram -= demand[1]
        self.free_storage -= demand[2]

    def release(self, slice_id):
        held = self.reservations.pop(slice_id, (0, 0, 0.0))
        self.free_cpu += held[0]
        self.free_ram += held[1]
        self.free_storage += held[2]

    def snapshot(self):
        return {"node": self.node, "free": list(self.free),
                "reservations": {k: list(v) for k, v in sorted(self.reservations.items())}}


def build_vims(topo):
    return {node.id: VimState(node.id, node.dc) for node in topo.dc_nodes}


@dataclass
class PlacementPlan:
    assignment: dict
    cost: float
    feasible: bool
    method: str = "exact"
    violations: list = field(default_factory=list)

    def to_dict(self):
        return {"assignment": dict(sorted(self.assignment.items())),
                "cost": self.cost if math.isfinite(self.cost) else None,
                "feasible": self.feasible, "method": self.method, "violations": list(self.violations)}


class _Problem:
    """Candidates and a latency table shared by both solvers."""

    def __init__(self, nsd, topo, vims, latency_params):
        self.nsd = nsd
        self.topo = topo
        self.vims = {v.node: v for v in vims}
        self.params = latency_params
        self._latency = {}
        self.candidates = {}
        for vnf in nsd.vnfs:
            nodes = []
            for node_id in sorted(self.vims):
                node = topo.node(node_id)
                if node.dc is None or node.dc.tier not in vnf.allowed_tiers:
                    continue
                if vnf.pin_node is not None and vnf.pin_node != node_id:
                    continue
                if self.vims[node_id].can_host(vnf.demand):
                    nodes.append(node_id)
            self.candidates[vnf.name] = nodes

    def latency(self, u, v):
        key = (u, v)
        if key not in self._latency:
            try:
                self._latency[key] = path_latency(self.topo, u, v, self.params)
            except NetworkError:
                self._latency[key] = math.inf
        return self._latency[key]

    def endpoint(self, name, assignment):
        anchor = camera_node(name)
        return anchor if anchor is not None else assignment.get(name)

    def link_ok(self, link, u, v):
        lat = self.latency(u, v)
        return math.isfinite(lat) and (link.max_latency_ms is None or lat <= link.max_latency_ms + COST_EPSILON)


def plan_cost(nsd, assignment, latency):
    """Sum over links of bandwidth x path latency, links in NSD order."""
    total = 0.0
    for link in nsd.links:
        u = camera_node(link.from_vnf) or assignment[link.from_vnf]
        v = camera_node(link.to_vnf) or assignment[link.to_vnf]
        total += link.bandwidth_gbps * latency(u, v)
    return total


def _fits(used, demand, vim):
    return all(u + d <= f + COST_EPSILON for u, d, f in zip(used, demand, vim.free))


def _solve_exact(problem):
    nsd = problem.nsd
    order = sorted(nsd.vnfs, key=lambda v: v.name)
    used = {node: (0, 0, 0.0) for node in problem.vims}
    assignment = {}
    best = {"cost": math.inf, "assignment": None}

    def bound():
        total = 0.0
        for link in nsd.links:
            u = problem.endpoint(link.from_vnf, assignment)
            v = problem.endpoint(link.to_vnf, assignment)
            if u is not None and v is not None:
                total += link.bandwidth_gbps * problem.latency(u, v)
            elif u is not None or v is not None:
                fixed, free_name = (u, link.to_vnf) if u is not None else (v, link.from_vnf)
                options = [problem.latency(fixed, n) if u is not None else problem.latency(n, fixed)
                           for n in problem.candidates[free_name]]
                total += link.bandwidth_gbps * min(options, default=math.inf)
        return total

    def links_ok(name):
        for link in nsd.links:
            if name not in (link.from_vnf, link.to_vnf):
                continue
            u = problem.endpoint(link.from_vnf, assignment)
            v = problem.endpoint(link.to_vnf, assignment)
            if u is not None and v is not None and not problem.link_ok(link, u, v):
                return False
        return True

    def search(i):
        if i == len(order):
            cost = plan_cost(nsd, assignment, problem.latency)
            if cost < best["cost"]:
                best["cost"], best["assignment"] = cost, dict(assignment)
            return
        vnf = order[i]
        for node in problem.candidates[vnf.name]:
            if not _fits(used[node], vnf.demand, problem.vims[node]):
                continue
            assignment[vnf.name] = node
            before = used[node]
            used[node] = tuple(a + b for a, b in zip(before, vnf.demand))
            if links_ok(vnf.name) and bound() <= best["cost"] + COST_EPSILON:
                search(i + 1)
            used[node] = before
            del assignment[vnf.name]

    search(0)
    return best["assignment"], best["cost"]


def _solve_greedy(problem):
    nsd = problem.nsd
    order = sorted(nsd.vnfs, key=lambda v: (-v.cpu_cores, -v.ram_gb, -v.storage_tb, v.name))
    used = {node: (0, 0, 0.0) for node in problem.vims}
    assignment = {}
    for vnf in order:
        choice = None
        for node in problem.candidates[vnf.name]:
            if not _fits(used[node], vnf.demand, problem.vims[node]):
                continue
            assignment[vnf.name] = node
            marginal, ok = 0.0, True
            for link in nsd.links:
                if vnf.name not in (link.from_vnf, link.to_vnf):
                    continue
                u = problem.endpoint(link.from_vnf, assignment)
                v = problem.endpoint(link.to_vnf, assignment)
                if u is None or v is None:
                    continue
                if not problem.link_ok(link, u, v):
                    ok = False
                    break
                marginal += link.bandwidth_gbps * problem.latency(u, v)
            del assignment[vnf.name]
            if ok and (choice is None or (marginal, node) < choice):
                choice = (marginal, node)
        if choice is None:
            return None, [f"no feasible node for {vnf.name}"]
        assignment[vnf.name] = choice[1]
        used[choice[1]] = tuple(a + b for a, b in zip(used[choice[1]], vnf.demand))
    return assignment, []


def place_vnfs(nsd, topo, vims, latency_model=None, method="auto"):
    """
    Place every VNF of an NSD on a data center.

    Minimizes the sum over links of bandwidth x path latency subject to tier,
    pin, VIM capacity and per-link latency bounds. Branch-and-bound gives the
    exact optimum for small instances; larger ones use a greedy pass.

    Args:
        nsd (NetworkServiceDescriptor): Service to place
        topo (Topology): Network
        vims (list[VimState]): Current free capacities
        latency_model (LatencyParams): Latency parameters
        method (str): auto, exact or greedy

    Returns:
        PlacementPlan: feasible=False with violations when nothing fits
    """
    check_nsd(nsd, topo)
    latency_model = latency_model or LatencyParams.from_config()
    vims = list(vims)
    if method == "auto":
        small = len(nsd.vnfs) <= configure.EXACT_MAX_VNFS and len(vims) <= configure.EXACT_MAX_DCS
        method = "exact" if small else "greedy"

    violations = []
    for i, label in enumerate(("cpu", "ram", "storage")):
        demand = sum(v.demand[i] for v in nsd.vnfs)
        free = sum(vim.free[i] for vim in vims)
        if demand > free + COST_EPSILON:
            violations.append(f"aggregate {label} demand {demand:g} exceeds free {free:g}")

    problem = _Problem(nsd, topo, vims, latency_model)
    for vnf in nsd.vnfs:
        if not problem.candidates[vnf.name]:
            violations.append(f"{vnf.name} has no data center of an allowed tier with room")
    if violations:
        logger.warning(f"⚠️ Placement infeasible: {'; '.join(violations)}")
        return PlacementPlan({}, math.inf, False, method, violations)

    if method == "exact":
        assignment, _ = _solve_exact(problem)
        if assignment is None:
            violations = ["no assignment satisfies capacity and latency constraints"]
    else:
        assignment, violations = _solve_greedy(problem)

    if assignment is None:
        logger.warning(f"⚠️ Placement infeasible ({method}): {'; '.join(violations)}")
        return PlacementPlan({}, math.inf, False, method, violations)

    cost = plan_cost(nsd, assignment, problem.latency)
    logger.info(f"✅ Placed {len(assignment)} VNFs ({method}), cost {cost:.4f}")
    return PlacementPlan(assignment, cost, True, method, [])


def verify_placement(nsd, topo, vims, plan, latency_model=None):
    """
    Re-evaluate every placement constraint from scratch.

    Returns:
        list[str]: Violations; empty when the plan is valid
    """
    latency_model = latency_model or LatencyParams.from_config()
    vims = {v.node: v for v in vims}
    problems = []
    load = {}
    for vnf in nsd.vnfs:
        node_id = plan.assignment.get(vnf.name)
        if node_id is None:
            problems.append(f"{vnf.name} is not placed")
            continue
        node = topo.node(node_id)
        if node.dc is None or node_id not in vims:
            problems.append(f"{vnf.name} placed on {node_id} without a data center")
            continue
        if node.dc.tier not in vnf.allowed_tiers:
            problems.append(f"{vnf.name} placed on a {node.dc.tier.value}")
        if vnf.pin_node is not None and vnf.pin_node != node_id:
            problems.append(f"{vnf.name} pinned to {vnf.pin_node} but placed on {node_id}")
        load[node_id] = [a + b for a, b in zip(load.get(node_id, [0, 0, 0.0]), vnf.demand)]

    for node_id, total in load.items():
        for label, used, free in zip(("cpu", "ram", "storage"), total, vims[node_id].free):
            if used > free + COST_EPSILON:
                problems.append(f"{node_id} {label} over capacity: {used:g} > {free:g}")

    for link in nsd.links:
        u = camera_node(link.from_vnf) or plan.assignment.get(link.from_vnf)
        v = camera_node(link.to_vnf) or plan.assignment.get(link.to_vnf)
        if u is None or v is None:
            continue
        try:
            lat = 0.0 if u == v else compute_latency(topo, route_path(topo, u, v).hops, latency_model)
        except NetworkError:
            problems.append(f"no path for {link.from_vnf}->{link.to_vnf}")
            continue
        if link.max_latency_ms is not None and lat > link.max_latency_ms + COST_EPSILON:
            problems.append(f"{link.from_vnf}->{link.to_vnf} latency {lat:.3f} ms over {link.max_latency_ms} ms")
    return problems


def load_vnf_catalog(path=None):
    with open(path or configure.DEFAULT_VNF_CATALOG, "r") as f:
        return json.load(f)


def build_surveillance_nsd(topo, scenario=None, catalog=None, cameras_per_amen=150):
    """
    Default video-surveillance service for a topology.

    One CSS (with its device manager co-packaged) pinned at every AMEN, one CSM,
    ANALYTICS, STORAGE_DB, FIREWALL and NAT. Camera ingest, analytics feeds and
    PTZ control follow the scenario's camera counts when one is given.
    """
    catalog = catalog or load_vnf_catalog()
    sizes = catalog["vnfs"]
    rates = catalog["links"]

    def descriptor(name, kind, pin=None):
        size = sizes[kind]
        return VnfDescriptor(name, VnfKind(kind), size["cpu_cores"], size["ram_gb"], float(size["storage_tb"]),
                             frozenset(DcTier(t) for t in size["allowed_tiers"]), pin)

    vnfs = [descriptor(f"css-{a.id}", "CSS", a.id) for a in topo.amens]
    vnfs += [descriptor("csm", "CSM"), descriptor("analytics", "ANALYTICS"), descriptor("storage-db", "STORAGE_DB"),
             descriptor("firewall", "FIREWALL"), descriptor("nat", "NAT")]

    stream = configure.WORKLOAD["stream_mbps"]
    ptz_mbps = configure.WORKLOAD["ptz_control_mbps"]
    links = []
    for amen in topo.amens:
        css = f"css-{amen.id}"
        if scenario is not None:
            ingest_mbps = scenario.aggregate_mbps(amen.id)
            ptz_count = sum(1 for c in scenario.cameras_at(amen.id) if c.kind.value == "PTZ")
        else:
            ingest_mbps = cameras_per_amen * stream
            ptz_count = 1
        if ingest_mbps > 0:
            links.append(VirtualLink(f"{CAMERA_PREFIX}{amen.id}", css, ingest_mbps / 1000.0))
            links.append(VirtualLink(css, "analytics", ingest_mbps / 1000.0))
        links.append(VirtualLink(css, "csm", rates["control_gbps"]))
        links.append(VirtualLink(css, "csm", rates["archive_gbps"]))
        links.append(VirtualLink("analytics", css, max(ptz_count, 1) * ptz_mbps / 1000.0,
                                 configure.WORKLOAD["ptz_max_latency_ms"]))
    links.append(VirtualLink("csm", "storage-db", rates["storage_gbps"]))
    links.append(VirtualLink("csm", "firewall", rates["edge_gbps"]))
    links.append(VirtualLink("firewall", "nat", rates["edge_gbps"]))

    nsd = NetworkServiceDescriptor(tuple(vnfs), tuple(links))
    check_nsd(nsd, topo)
    return nsd


class SliceState(str, Enum):
    ACTIVE = "ACTIVE"
    FAILED = "FAILED"
    TORN_DOWN = "TORN_DOWN"


@dataclass
class SliceInstance:
    id: str
    plan: PlacementPlan
    services: list
    state: SliceState
    cause: dict = None

    def copy(self):
        return replace(self, services=list(self.services))

    def to_dict(self):
        doc = {"id": self.id, "state": self.state.value, "services": list(self.services),
               "plan": self.plan.to_dict() if self.plan else None}
        if self.cause:
            doc["cause"] = self.cause
        return doc


class Orchestrator:
    """NFV orchestrator over the per-DC VIMs, with the COM controller as WIM."""

    def __init__(self, topo, com=None, latency_params=None):
        self.topo = topo
        self.com = com or ComController(topo)
        self.vims = build_vims(topo)
        self.latency_params = latency_params or LatencyParams.from_config()
        self.slices = {}
        self.fail_at = set()

    def _checkpoint(self, step):
        if step in self.fail_at:
            raise PlacementError("INJECTED_FAULT", f"fault injected at {step}", {"step": step})

    def sip_for(self, node_id):
        sips = self.com.domain.sips_at(node_id)
        if not sips:
            raise ServiceError("UNKNOWN_SIP", f"node {node_id} exposes no SIP", {"node": node_id})
        dc = [s for s in sips if s.kind == SipKind.DC_PORT]
        return (dc or sips)[0].id

    def _get(self, slice_id):
        try:
            return self.slices[slice_id]
        except KeyError:
            raise PlacementError("UNKNOWN_SLICE", f"slice {slice_id} does not exist", {"slice": slice_id})

    def instantiate_slice(self, slice_id, nsd, method="auto"):
        """
        Place, reserve and connect a slice, all or nothing.

        Every inter-node virtual link becomes an L3 connectivity service with
        the link's bandwidth. On any failure, services are deleted and VIM
        reservations released in reverse order and the slice is recorded FAILED.

        Returns:
            SliceInstance: Snapshot of the ACTIVE slice
        """
        existing = self.slices.get(slice_id)
        if existing is not None and existing.state != SliceState.FAILED:
            raise PlacementError("DUPLICATE_SLICE", f"slice {slice_id} already exists", {"slice": slice_id})
        check_nsd(nsd, self.topo)

        plan = None
        reserved, services = [], []
        try:
            self._checkpoint("before_placement")
            plan = place_vnfs(nsd, self.topo, self.vims.values(), self.latency_params, method)
            if not plan.feasible:
                raise PlacementError("PLACEMENT_INFEASIBLE", "no placement satisfies the constraints",
                                     {"violations": plan.violations})
            self._checkpoint("after_placement")

            per_node = {}
            for vnf in nsd.vnfs:
                node = plan.assignment[vnf.name]
                per_node[node] = tuple(a + b for a, b in zip(per_node.get(node, (0, 0, 0.0)), vnf.demand))
            for node in sorted(per_node):
                self.vims[node].reserve(slice_id, per_node[node])
                reserved.append(node)
                self._checkpoint("vim_reserved")

            for link in nsd.links:
                u = camera_node(link.from_vnf) or plan.assignment[link.from_vnf]
                v = camera_node(link.to_vnf) or plan.assignment[link.to_vnf]
                if u == v:
                    continue
                self._checkpoint("before_wim_service")
                svc = self.com.create_connectivity_service(self.sip_for(u), self.sip_for(v), ServiceLayer.L3,
                                                           link.bandwidth_gbps, owner=slice_id)
                services.append(svc.id)
                self._checkpoint("after_wim_service")
            self._checkpoint("before_activate")
        except NetworkError as e:
            for service_id in reversed(services):
                self.com.delete_connectivity_service(service_id, owner=slice_id)
            for node in reversed(reserved):
                self.vims[node].release(slice_id)
            self.slices[slice_id] = SliceInstance(slice_id, plan, [], SliceState.FAILED, cause=e.to_dict())
            e.details.setdefault("slice", slice_id)
            logger.warning(f"❌ Slice {slice_id} failed and was rolled back: {e.code}")
            raise

        instance = SliceInstance(slice_id, plan, services, SliceState.ACTIVE)
        self.slices[slice_id] = instance
        logger.info(f"✅ Slice {slice_id} active with {len(services)} L3 services")
        return instance.copy()

    def teardown_slice(self, slice_id):
        instance = self._get(slice_id)
        if instance.state != SliceState.ACTIVE:
            raise PlacementError("INVALID_STATE", f"slice {slice_id} is {instance.state.value}",
                                 {"slice": slice_id, "state": instance.state.value})
        live = [sid for sid in reversed(instance.services)
                if self.com.get_service(sid).state == ServiceState.ACTIVE]
        if len(live) != len(instance.services):
            logger.warning(f"⚠️ Slice {slice_id} has {len(instance.services) - len(live)} services no longer active")
        try:
            for service_id in live:
                self.com.delete_connectivity_service(service_id, owner=slice_id)
        finally:
            for vim in self.vims.values():
                vim.release(slice_id)
            instance.state = SliceState.TORN_DOWN
        logger.info(f"🗑️ Slice {slice_id} torn down")
        return instance.copy()

    def get_slice(self, slice_id):
        return self._get(slice_id).copy()

    def snapshot(self):
        active = {sid: s.to_dict() for sid, s in sorted(self.slices.items()) if s.state == SliceState.ACTIVE}
        return {"vims": {n: v.snapshot() for n, v in sorted(self.vims.items())}, "slices": active,
                "com": self.com.snapshot()}
