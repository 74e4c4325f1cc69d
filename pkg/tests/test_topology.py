# tests/test_topology.py
import json
import unittest

from hypothesis import given, settings, strategies as st

from errors import TopologyError
from tests.helpers import chain, chain_doc, demo5, demo5_doc, mutate
from topology import (AmpVariant, DcTier, NodeKind, Vendor, broadcast_segments, load_topology,
                      load_topology_file, topology_summary)


class TestLoadTopology(unittest.TestCase):

    def test_demo_topology(self):
        topo = demo5()
        self.assertEqual(len(topo.nodes), 5)
        self.assertEqual(len(topo.spans), 4)
        self.assertEqual(topo.warnings, ())
        self.assertEqual(topo.line, ("MCEN1", "AMEN1", "AMEN2", "AMEN3", "MCEN2"))
        self.assertEqual([s.length_km for s in topo.spans], [40.0, 80.0, 60.0, 120.0])
        self.assertEqual(topo.grid.channel_count, 80)

    def test_node_attributes(self):
        topo = demo5()
        mcen2 = topo.node("MCEN2")
        self.assertEqual(mcen2.kind, NodeKind.MCEN)
        self.assertEqual(mcen2.amp_variant, AmpVariant.EDFA)
        self.assertEqual(mcen2.dc.tier, DcTier.CDC)
        self.assertEqual(mcen2.transponders[0].vendor, Vendor.A)
        self.assertEqual(len(mcen2.slots), 2)
        self.assertEqual(mcen2.supported_formats(), frozenset({"DP-QPSK", "DP-16QAM"}))
        self.assertIn("DP-64QAM", topo.node("AMEN1").supported_formats(0))
        self.assertEqual([n.id for n in topo.amens], ["AMEN1", "AMEN2", "AMEN3"])

    def test_default_loss_coefficient(self):
        topo = demo5()
        self.assertAlmostEqual(topo.spans[1].loss_db, 16.0)

    def test_json_text_accepted(self):
        topo = load_topology(json.dumps(demo5_doc()))
        self.assertEqual(topo, demo5())

    def test_deterministic(self):
        self.assertEqual(load_topology(demo5_doc()), load_topology(demo5_doc()))

    def test_zero_nodes(self):
        with self.assertRaises(TopologyError) as ctx:
            load_topology({"nodes": [], "spans": []})
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_duplicate_node_id(self):
        doc = mutate(demo5_doc(), lambda d: d["nodes"][2].update(id="AMEN1"))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")
        self.assertIn("duplicate", ctx.exception.message)

    def test_dangling_span_endpoint(self):
        doc = mutate(demo5_doc(), lambda d: d["spans"][0].update(a="NOWHERE"))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_wrong_mcen_count(self):
        doc = mutate(demo5_doc(), lambda d: d["nodes"][4].update(kind="AMEN", dc=None))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_not_a_path(self):
        def add_chord(d):
            d["spans"].append({"id": "S5", "a": "MCEN1", "z": "AMEN3", "length_km": 50})
        with self.assertRaises(TopologyError) as ctx:
            load_topology(mutate(demo5_doc(), add_chord))
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_mcen_must_terminate_line(self):
        def swap(d):
            d["spans"] = [
                {"id": "S1", "a": "AMEN1", "z": "MCEN1", "length_km": 40},
                {"id": "S2", "a": "MCEN1", "z": "AMEN2", "length_km": 80},
                {"id": "S3", "a": "AMEN2", "z": "AMEN3", "length_km": 60},
                {"id": "S4", "a": "AMEN3", "z": "MCEN2", "length_km": 120},
            ]
        with self.assertRaises(TopologyError) as ctx:
            load_topology(mutate(demo5_doc(), swap))
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_dc_tier_placement(self):
        doc = mutate(demo5_doc(), lambda d: d["nodes"][0]["dc"].update(tier="EDC"))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_dc_requires_transponder(self):
        doc = mutate(demo5_doc(), lambda d: d["nodes"][1].update(transponders=[]))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_unknown_field_is_parse_error(self):
        doc = mutate(demo5_doc(), lambda d: d["spans"][0].update(colour="yellow"))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "PARSE_ERROR")

    def test_bad_enum_is_parse_error(self):
        doc = mutate(demo5_doc(), lambda d: d["nodes"][1].update(amp_variant="RAMAN"))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "PARSE_ERROR")

    def test_malformed_json(self):
        with self.assertRaises(TopologyError) as ctx:
            load_topology("{not json")
        self.assertEqual(ctx.exception.code, "PARSE_ERROR")

    def test_missing_file(self):
        with self.assertRaises(TopologyError) as ctx:
            load_topology_file("/nonexistent/topology.json")
        self.assertEqual(ctx.exception.code, "PARSE_ERROR")

    def test_span_length_warning(self):
        topo = chain([10, 80, 250])
        self.assertEqual(len(topo.warnings), 2)
        self.assertTrue(all("outside typical" in w for w in topo.warnings))

    def test_zero_channel_grid(self):
        doc = mutate(demo5_doc(), lambda d: d["grid"].update(channel_count=0))
        with self.assertRaises(TopologyError) as ctx:
            load_topology(doc)
        self.assertEqual(ctx.exception.code, "INVALID_TOPOLOGY")

    def test_unknown_node_lookup(self):
        with self.assertRaises(TopologyError) as ctx:
            demo5().node("AMEN9")
        self.assertEqual(ctx.exception.code, "UNKNOWN_NODE")

    def test_grid_frequencies(self):
        grid = demo5().grid
        self.assertEqual(grid.frequency_thz(0), 191.6)
        self.assertEqual(grid.frequency_thz(10), 192.1)


class TestBroadcastSegments(unittest.TestCase):

    def test_blockers_everywhere(self):
        segments = broadcast_segments(demo5())
        self.assertEqual([s.span_ids for s in segments], [("S1",), ("S2",), ("S3",), ("S4",)])

    def test_no_blockers(self):
        doc = demo5_doc()
        for node in doc["nodes"]:
            node["has_blocker"] = False
        segments = broadcast_segments(load_topology(doc))
        self.assertEqual(len(segments), 1)
        self.assertEqual(segments[0].span_ids, ("S1", "S2", "S3", "S4"))

    def test_blocker_only_at_amen2(self):
        doc = demo5_doc()
        for node in doc["nodes"]:
            node["has_blocker"] = node["id"] == "AMEN2"
        segments = broadcast_segments(load_topology(doc))
        self.assertEqual([s.span_ids for s in segments], [("S1", "S2"), ("S3", "S4")])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.booleans(), min_size=2, max_size=9))
    def test_segments_partition_spans(self, blockers):
        doc = chain_doc([50] * (len(blockers) - 1))
        for node, flag in zip(doc["nodes"], blockers):
            node["has_blocker"] = flag
        topo = load_topology(doc)
        segments = broadcast_segments(topo)
        flattened = [sid for seg in segments for sid in seg.span_ids]
        self.assertEqual(flattened, [s.id for s in topo.spans])
        interior_blockers = sum(1 for flag in blockers[1:-1] if flag)
        self.assertEqual(len(segments), interior_blockers + 1)


class TestSummary(unittest.TestCase):

    def test_summary(self):
        summary = topology_summary(demo5())
        self.assertEqual(summary["nodes"], 5)
        self.assertEqual(summary["total_length_km"], 300.0)
        self.assertEqual(summary["mcens"], ["MCEN1", "MCEN2"])
        self.assertEqual(len(summary["segments"]), 4)
        self.assertEqual(summary["data_centers"]["AMEN2"], "EDC")


if __name__ == '__main__':
    unittest.main()
