# control.py
"""
Hierarchical control, orchestration and management (COM).

The parent controller sees the optical domain only as a set of service
interface points (SIPs) and offers three service layers on top of it: OPTICAL
media channels, L2 VLAN segments and L3 VXLAN connectivity. Spectrum decisions
stay in the optical layer; this module passes intents down and keeps the
VLAN/VNI pools, rider bandwidth and service lifecycle.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import configure
from errors import NetworkError, ServiceError
from optical import ChannelState, OpticalNetwork
from utils import generate_sequence_id, generate_sip_id

logger = logging.getLogger("control")

BANDWIDTH_EPSILON = 1e-9


class SipKind(str, Enum):
    TRANSPONDER_PORT = "TRANSPONDER_PORT"
    DC_PORT = "DC_PORT"


class ServiceLayer(str, Enum):
    OPTICAL = "OPTICAL"
    L2 = "L2"
    L3 = "L3"


class ServiceState(str, Enum):
    PLANNED = "PLANNED"
    PROVISIONING = "PROVISIONING"
    ACTIVE = "ACTIVE"
    DELETING = "DELETING"
    DELETED = "DELETED"
    FAILED = "FAILED"


LEGAL_TRANSITIONS = {
    ServiceState.PLANNED: {ServiceState.PROVISIONING},
    ServiceState.PROVISIONING: {ServiceState.ACTIVE, ServiceState.FAILED},
    ServiceState.ACTIVE: {ServiceState.DELETING},
    ServiceState.DELETING: {ServiceState.DELETED},
}


class DeviceKind(str, Enum):
    TRANSPONDER = "TRANSPONDER"
    BLOCKER = "BLOCKER"


class Dialect(str, Enum):
    OPENCONFIG_LIKE = "OPENCONFIG_LIKE"
    OPENROADM_LIKE = "OPENROADM_LIKE"


@dataclass(frozen=True)
class ServiceInterfacePoint:
    id: str
    node: str
    kind: SipKind
    slot: int = None

    def to_dict(self):
        return {"id": self.id, "kind": self.kind.value}


class AbstractedDomain:
    """The optical domain as one managed entity: SIPs only, no nodes or spans."""

    def __init__(self, sips, internal):
        self.sips = tuple(sips)
        self._internal = internal
        self._by_id = {s.id: s for s in self.sips}

    def sip(self, sip_id):
        try:
            return self._by_id[sip_id]
        except KeyError:
            raise ServiceError("UNKNOWN_SIP", f"service interface point {sip_id} does not exist", {"sip": sip_id})

    def sips_at(self, node_id):
        return [s for s in self.sips if s.node == node_id]

    def to_dict(self):
        return {"sips": [s.to_dict() for s in self.sips]}


def abstract_domain(topo):
    """One SIP per transponder slot and one per data center port."""
    sips = []
    for node_id in topo.line:
        node = topo.node(node_id)
        for slot in range(len(node.slots)):
            sips.append(ServiceInterfacePoint(generate_sip_id(node_id, "TRX", slot + 1), node_id,
                                              SipKind.TRANSPONDER_PORT, slot))
        if node.dc is not None:
            sips.append(ServiceInterfacePoint(generate_sip_id(node_id, "DC"), node_id, SipKind.DC_PORT))
    return AbstractedDomain(sips, topo)


@dataclass
class ConnectivityService:
    id: str
    layer: ServiceLayer
    sip_a: ServiceInterfacePoint
    sip_z: ServiceInterfacePoint
    state: ServiceState
    bandwidth_gbps: float
    format_hint: str = None
    underlying: str = None
    vlan_id: int = None
    vni: int = None
    history: list = field(default_factory=list)
    error: dict = None
    owner: str = None

    def copy(self):
        return replace(self, history=list(self.history))

    def to_dict(self, with_history=True):
        doc = {
            "id": self.id,
            "layer": self.layer.value,
            "sip_a": self.sip_a.id,
            "sip_z": self.sip_z.id,
            "state": self.state.value,
            "bandwidth_gbps": self.bandwidth_gbps,
            "format_hint": self.format_hint,
            "underlying": self.underlying,
            "vlan_id": self.vlan_id,
            "vni": self.vni,
        }
        if self.owner:
            doc["owner"] = self.owner
        if with_history:
            doc["history"] = [s.value for s in self.history]
        if self.error:
            doc["error"] = self.error
        return doc


@dataclass(frozen=True)
class DeviceConfig:
    node: str
    device_kind: DeviceKind
    payload: dict
    dialect: Dialect

    def to_dict(self):
        return {"device": {"node": self.node, "kind": self.device_kind.value},
                "dialect": self.dialect.value, "payload": self.payload}


class ComController:
    """Parent SDN controller state (also serves as the WIM for the orchestrator)."""

    def __init__(self, topo, optical=None, vlan_range=None, vni_range=None):
        self.topo = topo
        self.domain = abstract_domain(topo)
        self.optical = optical or OpticalNetwork(topo)
        self.vlan_range = vlan_range or configure.VLAN_RANGE
        self.vni_range = vni_range or configure.VNI_RANGE
        self.services = {}
        self.riders = {}
        self.vlans = {}
        self.vnis = set()
        self.channel_sips = {}
        self.dedicated = set()
        self._counter = 0

    # lifecycle

    def _transition(self, svc, new_state):
        if new_state not in LEGAL_TRANSITIONS.get(svc.state, set()):
            raise ServiceError("INTERNAL_ERROR", f"illegal transition {svc.state.value} -> {new_state.value}",
                               {"service": svc.id})
        svc.state = new_state
        svc.history.append(new_state)

    def _get(self, service_id):
        try:
            return self.services[service_id]
        except KeyError:
            raise ServiceError("UNKNOWN_SERVICE", f"connectivity service {service_id} does not exist",
                               {"service": service_id})

    # bandwidth bookkeeping

    def used_bandwidth(self, channel_id):
        return sum(self.services[sid].bandwidth_gbps for sid in self.riders.get(channel_id, []))

    def spare_bandwidth(self, channel_id):
        channel = self.optical.channels[channel_id]
        return channel.format.net_rate_gbps - self.used_bandwidth(channel_id)

    def _check_bandwidth(self, channel_id):
        if self.spare_bandwidth(channel_id) < -BANDWIDTH_EPSILON:
            raise ServiceError("INTERNAL_ERROR", f"riders exceed the rate of {channel_id}", {"channel": channel_id})

    @staticmethod
    def _sip_pair(a, z):
        return tuple(sorted((a.id, z.id)))

    # pools

    def _allocate_vlan(self, channel_id):
        used = self.vlans.setdefault(channel_id, set())
        lo, hi = self.vlan_range
        for vlan in range(lo, hi + 1):
            if vlan not in used:
                used.add(vlan)
                return vlan
        raise ServiceError("L2_POOL_EXHAUSTED", f"no free VLAN id on {channel_id}", {"channel": channel_id})

    def _allocate_vni(self):
        lo, hi = self.vni_range
        vni = lo
        while vni in self.vnis:
            vni += 1
        if vni > hi:
            raise ServiceError("VNI_POOL_EXHAUSTED", "no free VNI", {"range": [lo, hi]})
        self.vnis.add(vni)
        return vni

    # channel selection

    def _endpoint_slots(self, a, z):
        slot = lambda sip: sip.slot if sip.kind == SipKind.TRANSPONDER_PORT else None
        return slot(a), slot(z)

    def _reusable_channel(self, a, z, bandwidth, format_hint):
        pair = self._sip_pair(a, z)
        candidates = []
        for channel_id, sips in self.channel_sips.items():
            if sips != pair or channel_id in self.dedicated:
                continue
            channel = self.optical.channels[channel_id]
            if format_hint and channel.format.name != format_hint:
                continue
            spare = self.spare_bandwidth(channel_id)
            if spare + BANDWIDTH_EPSILON >= bandwidth:
                candidates.append((-spare, channel_id))
        return self.optical.channels[min(candidates)[1]] if candidates else None

    def _new_channel(self, a, z, bandwidth, format_hint, launch_power_dbm):
        src_slot, dst_slot = self._endpoint_slots(a, z)
        if format_hint:
            fmt = self.optical.get_format(format_hint)
        else:
            fmt = self.optical.best_feasible_format(a.node, z.node, launch_power_dbm, src_slot, dst_slot)
        if bandwidth > fmt.net_rate_gbps + BANDWIDTH_EPSILON:
            raise ServiceError("CAPACITY_EXCEEDED",
                               f"{bandwidth} Gb/s exceeds the {fmt.net_rate_gbps} Gb/s of {fmt.name}",
                               {"bandwidth_gbps": bandwidth, "format": fmt.name})
        channel = self.optical.provision_media_channel(a.node, z.node, fmt, launch_power_dbm, src_slot, dst_slot)
        self.channel_sips[channel.id] = self._sip_pair(a, z)
        self.riders[channel.id] = []
        return channel

    def _detach(self, svc):
        channel_id = svc.underlying
        riders = self.riders.get(channel_id, [])
        if svc.id in riders:
            riders.remove(svc.id)
        if svc.vlan_id is not None:
            self.vlans.get(channel_id, set()).discard(svc.vlan_id)
        if svc.vni is not None:
            self.vnis.discard(svc.vni)
        return channel_id, not riders

    def _forget_channel(self, channel_id):
        for table in (self.riders, self.vlans, self.channel_sips):
            table.pop(channel_id, None)
        self.dedicated.discard(channel_id)

    # northbound operations

    def create_connectivity_service(self, sip_a, sip_z, layer, bandwidth_gbps=0.0, format_hint=None,
                                    launch_power_dbm=None, owner=None):
        """
        Create an OPTICAL, L2 or L3 connectivity service between two SIPs.

        L2/L3 services ride an existing channel between the same SIP pair when
        one has spare bandwidth, otherwise a new media channel is lit. Any
        failure rolls every allocation back and leaves the record FAILED.

        Returns:
            ConnectivityService: Snapshot of the ACTIVE service
        """
        try:
            layer = ServiceLayer(layer)
        except ValueError:
            raise ServiceError("INVALID_PARAMS", f"unknown layer {layer}", {"layer": layer})
        a = self.domain.sip(sip_a)
        z = self.domain.sip(sip_z)
        if a.id == z.id:
            raise ServiceError("SAME_ENDPOINT", f"both ends are {a.id}", {"sip": a.id})
        bandwidth_gbps = float(bandwidth_gbps or 0.0)
        if bandwidth_gbps < 0 or (layer != ServiceLayer.OPTICAL and bandwidth_gbps <= 0):
            raise ServiceError("INVALID_PARAMS", "bandwidth_gbps must be > 0 for L2/L3 and >= 0 for OPTICAL",
                               {"bandwidth_gbps": bandwidth_gbps})

        self._counter += 1
        svc = ConnectivityService(id=generate_sequence_id("cs", self._counter), layer=layer, sip_a=a, sip_z=z,
                                  state=ServiceState.PLANNED, bandwidth_gbps=bandwidth_gbps,
                                  format_hint=format_hint, history=[ServiceState.PLANNED], owner=owner)
        self.services[svc.id] = svc
        self._transition(svc, ServiceState.PROVISIONING)

        new_channel = None
        try:
            if layer == ServiceLayer.OPTICAL:
                channel = new_channel = self._new_channel(a, z, bandwidth_gbps, format_hint, launch_power_dbm)
                self.dedicated.add(channel.id)
            else:
                channel = self._reusable_channel(a, z, bandwidth_gbps, format_hint)
                if channel is None:
                    channel = new_channel = self._new_channel(a, z, bandwidth_gbps, format_hint, launch_power_dbm)
                svc.underlying = channel.id
                if layer == ServiceLayer.L2:
                    svc.vlan_id = self._allocate_vlan(channel.id)
                else:
                    svc.vni = self._allocate_vni()
            svc.underlying = channel.id
            self.riders[channel.id].append(svc.id)
            self._check_bandwidth(channel.id)
        except NetworkError as e:
            if svc.underlying is not None:
                self._detach(svc)
            if new_channel is not None:
                self.optical.discard_media_channel(new_channel.id)
                self._forget_channel(new_channel.id)
            svc.underlying = svc.vlan_id = svc.vni = None
            svc.error = e.to_dict()
            self._transition(svc, ServiceState.FAILED)
            e.details.setdefault("service", svc.id)
            logger.debug("❌ %s %s %s->%s failed: %s", svc.id, layer.value, a.id, z.id, e.code)
            raise

        self._transition(svc, ServiceState.ACTIVE)
        logger.debug("✅ %s %s %s->%s on %s ch%d", svc.id, layer.value, a.id, z.id, channel.id,
                     channel.channel_index)
        return svc.copy()

    def delete_connectivity_service(self, service_id, owner=None):
        """Delete an ACTIVE service; a slice's services only go through that slice."""
        svc = self._get(service_id)
        if svc.state != ServiceState.ACTIVE:
            raise ServiceError("INVALID_STATE", f"{service_id} is {svc.state.value}, not ACTIVE",
                               {"service": service_id, "state": svc.state.value})
        if svc.owner is not None and svc.owner != owner:
            raise ServiceError("INVALID_STATE", f"{service_id} belongs to slice {svc.owner}",
                               {"service": service_id, "slice": svc.owner})
        self._transition(svc, ServiceState.DELETING)
        channel_id, last_rider = self._detach(svc)
        if last_rider:
            self.optical.release_media_channel(channel_id)
            self._forget_channel(channel_id)
        self._transition(svc, ServiceState.DELETED)
        logger.debug("🗑️ %s deleted (channel %s released: %s)", service_id, channel_id, last_rider)
        return svc.copy()

    def modify_connectivity_service(self, service_id, bandwidth_gbps):
        """Change an L2/L3 service's bandwidth within its channel's spare capacity."""
        svc = self._get(service_id)
        if svc.state != ServiceState.ACTIVE:
            raise ServiceError("INVALID_STATE", f"{service_id} is {svc.state.value}, not ACTIVE",
                               {"service": service_id, "state": svc.state.value})
        if svc.layer == ServiceLayer.OPTICAL or bandwidth_gbps <= 0:
            raise ServiceError("INVALID_PARAMS", "only L2/L3 bandwidth > 0 can be modified", {"service": service_id})
        spare = self.spare_bandwidth(svc.underlying) + svc.bandwidth_gbps
        if bandwidth_gbps > spare + BANDWIDTH_EPSILON:
            raise ServiceError("CAPACITY_EXCEEDED", f"{bandwidth_gbps} Gb/s exceeds {spare} Gb/s available",
                               {"service": service_id, "available_gbps": spare})
        svc.bandwidth_gbps = float(bandwidth_gbps)
        self._check_bandwidth(svc.underlying)
        return svc.copy()

    def get_service(self, service_id):
        return self._get(service_id).copy()

    def purge_service(self, service_id):
        """Drop a DELETED or FAILED record and the released channel under it."""
        svc = self._get(service_id)
        if svc.state not in (ServiceState.DELETED, ServiceState.FAILED):
            raise ServiceError("INVALID_STATE", f"{service_id} is {svc.state.value}; only ended services are purged",
                               {"service": service_id, "state": svc.state.value})
        del self.services[service_id]
        channel = self.optical.channels.get(svc.underlying)
        if channel is not None and channel.state == ChannelState.RELEASED:
            self.optical.discard_media_channel(channel.id)

    def render_device_configs(self, service_id):
        """
        Southbound device documents for an ACTIVE service's media channel.

        Two transponder configs (OpenConfig-like) plus one blocker config
        (OpenROADM-like) per blocker rule, ordered by node id then channel.
        """
        svc = self._get(service_id)
        if svc.state != ServiceState.ACTIVE:
            raise ServiceError("INVALID_STATE", f"{service_id} is {svc.state.value}, not ACTIVE",
                               {"service": service_id, "state": svc.state.value})
        channel = self.optical.channels[svc.underlying]
        frequency = self.topo.grid.frequency_thz(channel.channel_index)

        configs = []
        for sip in (svc.sip_a, svc.sip_z):
            configs.append(DeviceConfig(sip.node, DeviceKind.TRANSPONDER, {
                "sip": sip.id,
                "channel_index": channel.channel_index,
                "frequency_thz": frequency,
                "format": channel.format.name,
                "power_dbm": channel.launch_power_dbm,
                "optical-channel": {
                    "frequency": int(round(frequency * 1e6)),
                    "target-output-power": channel.launch_power_dbm,
                    "operational-mode": channel.format.name,
                },
            }, Dialect.OPENCONFIG_LIKE))
        for rule in self.optical.rules_for(channel.id):
            configs.append(DeviceConfig(rule.node, DeviceKind.BLOCKER, {
                "channel_index": rule.channel_index,
                "frequency_thz": frequency,
                "action": rule.action.value,
                "media-channel": {"frequency": frequency, "state": "pass" if rule.action.value == "PASS" else "blocked"},
            }, Dialect.OPENROADM_LIKE))

        kind_order = {DeviceKind.TRANSPONDER: 0, DeviceKind.BLOCKER: 1}
        return sorted(configs, key=lambda c: (c.node, c.payload["channel_index"], kind_order[c.device_kind]))

    def snapshot(self):
        """Resource state only: spectrum, pools, riders and active services."""
        active = sorted((s for s in self.services.values() if s.state == ServiceState.ACTIVE), key=lambda s: s.id)
        return {
            "optical": self.optical.snapshot(),
            "vlans": {cid: sorted(v) for cid, v in sorted(self.vlans.items()) if v},
            "vnis": sorted(self.vnis),
            "riders": {cid: list(r) for cid, r in sorted(self.riders.items())},
            "active_services": {s.id: s.to_dict(with_history=False) for s in active},
        }


def handle_request(com, doc):
    """
    Dispatch one northbound request document.

    Args:
        com (ComController): Controller state
        doc (dict): {"operation": create|delete|get|modify, ...}

    Returns:
        dict: The service document
    """
    allowed = {
        "create": {"sip_a", "sip_z", "layer", "bandwidth_gbps", "format_hint", "launch_power_dbm"},
        "delete": {"service_id"},
        "get": {"service_id"},
        "modify": {"service_id", "bandwidth_gbps"},
    }
    operation = doc.get("operation")
    if operation not in allowed:
        raise ServiceError("INVALID_PARAMS", f"unknown operation {operation}", {"operation": operation})
    unknown = sorted(set(doc) - allowed[operation] - {"operation"})
    if unknown:
        raise ServiceError("INVALID_PARAMS", f"unknown field(s): {', '.join(unknown)}", {"fields": unknown})

    if operation == "create":
        missing = sorted({"sip_a", "sip_z", "layer"} - set(doc))
        if missing:
            raise ServiceError("INVALID_PARAMS", f"missing field(s): {', '.join(missing)}", {"fields": missing})
        svc = com.create_connectivity_service(doc["sip_a"], doc["sip_z"], doc["layer"],
                                              doc.get("bandwidth_gbps", 0.0), doc.get("format_hint"),
                                              doc.get("launch_power_dbm"))
    elif "service_id" not in doc:
        raise ServiceError("INVALID_PARAMS", "missing field: service_id", {"fields": ["service_id"]})
    elif operation == "delete":
        svc = com.delete_connectivity_service(doc["service_id"])
    elif operation == "modify":
        svc = com.modify_connectivity_service(doc["service_id"], float(doc.get("bandwidth_gbps", 0.0)))
    else:
        svc = com.get_service(doc["service_id"])
    return svc.to_dict()
