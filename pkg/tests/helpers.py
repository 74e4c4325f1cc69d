# tests/helpers.py
import copy
import json
import os

from topology import load_topology

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEMO5_PATH = os.path.join(ROOT, "data", "demo5.json")


def demo5_doc():
    with open(DEMO5_PATH, "r") as f:
        return json.load(f)


def demo5():
    return load_topology(demo5_doc())


def node_doc(node_id, kind, vendor="B", dc=None, has_blocker=True, amp="EDFA"):
    doc = {"id": node_id, "kind": kind, "amp_variant": amp, "has_blocker": has_blocker,
           "transponders": [{"vendor": vendor}]}
    if dc is not None:
        doc["dc"] = dc
    return doc


def chain_doc(lengths, blockers=True, amp="EDFA", channel_count=80, with_dcs=False):
    """Horseshoe MCEN-A1-...-An-MCEN with the given span lengths."""
    count = len(lengths) + 1
    nodes = []
    for i in range(count):
        if i in (0, count - 1):
            node_id = "M1" if i == 0 else "M2"
            dc = {"tier": "RDC", "cpu_cores": 64, "ram_gb": 256, "storage_tb": 500} if with_dcs else None
            nodes.append(node_doc(node_id, "MCEN", dc=dc, has_blocker=blockers, amp=amp))
        else:
            dc = {"tier": "EDC", "cpu_cores": 32, "ram_gb": 128, "storage_tb": 100} if with_dcs else None
            nodes.append(node_doc(f"A{i}", "AMEN", dc=dc, has_blocker=blockers, amp=amp))
    ids = [n["id"] for n in nodes]
    spans = [{"id": f"S{i + 1}", "a": ids[i], "z": ids[i + 1], "length_km": length}
             for i, length in enumerate(lengths)]
    return {"nodes": nodes, "spans": spans,
            "grid": {"channel_count": channel_count, "channel_spacing_ghz": 50.0, "base_frequency_thz": 191.6}}


def chain(lengths, **kwargs):
    return load_topology(chain_doc(lengths, **kwargs))


def two_node(channel_count=10, length_km=40):
    """Two MCENs joined by one span: a single broadcast segment."""
    return chain([length_km], channel_count=channel_count)


def mutate(doc, fn):
    doc = copy.deepcopy(doc)
    fn(doc)
    return doc
