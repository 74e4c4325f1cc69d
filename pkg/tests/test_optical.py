# tests/test_optical.py
import math
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

from errors import OpticalError, TopologyError
from optical import (BlockerAction, ChannelState, ImpairmentParams, OpticalNetwork, SpectrumState, assign_channel,
                     configure_blockers, evaluate_feasibility, load_format_catalog, route_path)
from tests.helpers import chain, demo5, demo5_doc
from topology import Segment, load_topology

FORMATS = load_format_catalog()


class TestRoutePath(unittest.TestCase):

    def test_amen2_to_mcen1(self):
        path = route_path(demo5(), "AMEN2", "MCEN1")
        self.assertEqual(path.hops, ("AMEN2", "AMEN1", "MCEN1"))
        self.assertEqual(path.total_length_km, 120.0)
        self.assertEqual([s.id for s in path.spans], ["S2", "S1"])

    def test_same_endpoint(self):
        with self.assertRaises(OpticalError) as ctx:
            route_path(demo5(), "MCEN1", "MCEN1")
        self.assertEqual(ctx.exception.code, "SAME_ENDPOINT")

    def test_span_down(self):
        doc = demo5_doc()
        doc["spans"][1]["operational"] = False
        with self.assertRaises(OpticalError) as ctx:
            route_path(load_topology(doc), "MCEN1", "MCEN2")
        self.assertEqual(ctx.exception.code, "NO_PATH")
        self.assertEqual(ctx.exception.details["down_spans"], ["S2"])

    def test_unknown_node(self):
        with self.assertRaises(TopologyError) as ctx:
            route_path(demo5(), "MCEN1", "AMEN7")
        self.assertEqual(ctx.exception.code, "UNKNOWN_NODE")


class TestFeasibility(unittest.TestCase):

    def test_single_span_example(self):
        topo = chain([80])
        path = route_path(topo, "M1", "M2")
        report = evaluate_feasibility(topo, path, FORMATS["DP-16QAM"], 0.0)
        self.assertAlmostEqual(report.total_loss_db, 26.5, places=6)
        self.assertAlmostEqual(report.osnr_db, 26.0, places=2)
        self.assertTrue(report.feasible)
        self.assertEqual(report.to_dict()["stage_osnr_db"], [26.0])
        self.assertFalse(evaluate_feasibility(topo, path, FORMATS["DP-64QAM"], 0.0).feasible)

    def test_stage_osnr_in_report(self):
        topo = demo5()
        report = evaluate_feasibility(topo, route_path(topo, "AMEN2", "MCEN1"), FORMATS["DP-QPSK"], 0.0)
        doc = report.to_dict()
        self.assertEqual(doc["stage_osnr_db"], [26.0, 34.0])
        combined = -10 * math.log10(sum(10 ** (-s / 10) for s in doc["stage_osnr_db"]))
        self.assertAlmostEqual(doc["osnr_db"], combined, places=5)

    def test_soa_lossless_stage(self):
        topo = chain([80], amp="SOA_LOSSLESS")
        path = route_path(topo, "M1", "M2")
        report = evaluate_feasibility(topo, path, FORMATS["DP-QPSK"], 0.0)
        self.assertAlmostEqual(report.total_loss_db, 16.0)
        self.assertAlmostEqual(report.osnr_db, 58 - 16 - 7, places=6)

    def test_zero_span_path(self):
        topo = demo5()
        path = route_path(topo, "AMEN1", "MCEN1")
        empty = type(path)(hops=("AMEN1",), spans=(), total_length_km=0.0)
        for fmt in FORMATS.values():
            report = evaluate_feasibility(topo, empty, fmt)
            self.assertEqual(report.total_loss_db, 0.0)
            self.assertTrue(math.isinf(report.osnr_db))
            self.assertTrue(report.feasible)

    def test_launch_power_shifts_osnr(self):
        topo = chain([80])
        path = route_path(topo, "M1", "M2")
        low = evaluate_feasibility(topo, path, FORMATS["DP-QPSK"], 0.0)
        high = evaluate_feasibility(topo, path, FORMATS["DP-QPSK"], 2.0)
        self.assertAlmostEqual(high.osnr_db - low.osnr_db, 2.0, places=6)

    def test_monotone_over_random_paths(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            lengths = rng.uniform(20, 200, size=int(rng.integers(2, 7))).round(1).tolist()
            amp = "SOA_LOSSLESS" if rng.random() < 0.3 else "EDFA"
            topo = chain(lengths, amp=amp)
            previous = math.inf
            for end in range(1, len(topo.line)):
                path = route_path(topo, topo.line[0], topo.line[end])
                reports = [evaluate_feasibility(topo, path, fmt) for fmt in FORMATS.values()]
                self.assertLessEqual(reports[0].osnr_db, previous + 1e-9)
                previous = reports[0].osnr_db
                flags = [r.feasible for r in reports]
                # QPSK feasible set contains 16QAM's, which contains 64QAM's
                self.assertEqual(flags, sorted(flags, reverse=True))

    def test_format_catalog_ordering_checked(self):
        table = {
            "DP-QPSK": {"baud_gbaud": 30, "net_rate_gbps": 100, "required_osnr_db": 22},
            "DP-16QAM": {"baud_gbaud": 30, "net_rate_gbps": 200, "required_osnr_db": 21},
            "DP-64QAM": {"baud_gbaud": 30, "net_rate_gbps": 300, "required_osnr_db": 27},
        }
        with self.assertRaises(OpticalError):
            load_format_catalog(table)

    def test_impairment_overrides(self):
        params = ImpairmentParams.from_config({"blocker_db": 0.0})
        topo = chain([80])
        path = route_path(topo, "M1", "M2")
        report = evaluate_feasibility(topo, path, FORMATS["DP-64QAM"], 0.0, params)
        self.assertAlmostEqual(report.osnr_db, 33.0, places=6)
        self.assertTrue(report.feasible)


class TestAssignChannel(unittest.TestCase):

    def setUp(self):
        self.segments = [Segment(i, (f"S{i + 1}",)) for i in range(4)]

    def test_empty(self):
        state = SpectrumState(self.segments, 80)
        self.assertEqual(assign_channel(state, [self.segments[0]]), 0)

    def test_skips_busy_prefix(self):
        state = SpectrumState(self.segments, 80)
        state.occupy([1], 0)
        for index in range(5):
            state.occupancy[1].add(index)
        self.assertEqual(assign_channel(state, [0, 1, 2]), 5)
        self.assertEqual(state.occupancy[0], set())

    def test_exhausted(self):
        state = SpectrumState(self.segments, 80)
        state.occupancy[2] = set(range(80))
        with self.assertRaises(OpticalError) as ctx:
            assign_channel(state, [1, 2])
        self.assertEqual(ctx.exception.code, "OPTICAL_BLOCKED")

    def test_first_fit_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            state = SpectrumState(self.segments, 80)
            density = rng.uniform(0.0, 1.0)
            for seg in range(4):
                state.occupancy[seg] = set(np.flatnonzero(rng.random(80) < density).tolist())
            touched = sorted(set(rng.choice(4, size=int(rng.integers(1, 5)), replace=False).tolist()))
            busy = set().union(*(state.occupancy[s] for s in touched))
            free = sorted(set(range(80)) - busy)
            if free:
                self.assertEqual(assign_channel(state, touched), free[0])
            else:
                with self.assertRaises(OpticalError):
                    assign_channel(state, touched)


class TestBlockers(unittest.TestCase):

    def test_interior_path(self):
        topo = demo5()
        rules = configure_blockers(topo, route_path(topo, "AMEN1", "AMEN3"), 4)
        self.assertEqual([(r.node, r.action) for r in rules],
                         [("MCEN1", BlockerAction.BLOCK), ("AMEN2", BlockerAction.PASS),
                          ("MCEN2", BlockerAction.BLOCK)])
        self.assertTrue(all(r.channel_index == 4 for r in rules))

    def test_end_of_line(self):
        topo = demo5()
        rules = configure_blockers(topo, route_path(topo, "MCEN1", "AMEN1"), 0)
        self.assertEqual([(r.node, r.action) for r in rules], [("AMEN2", BlockerAction.BLOCK)])

    def test_no_blockers(self):
        topo = chain([40, 80, 60, 120], blockers=False)
        self.assertEqual(configure_blockers(topo, route_path(topo, "A1", "A3"), 0), [])


class TestOpticalNetwork(unittest.TestCase):

    def setUp(self):
        self.net = OpticalNetwork(demo5())

    def test_first_provision(self):
        channel = self.net.provision_media_channel("AMEN1", "MCEN1", "DP-16QAM")
        self.assertEqual(channel.channel_index, 0)
        self.assertEqual(channel.state, ChannelState.ACTIVE)
        self.assertTrue(channel.report.feasible)
        self.assertEqual(channel.id, "mc-0001")

    def test_vendor_a_lacks_64qam(self):
        with self.assertRaises(OpticalError) as ctx:
            self.net.provision_media_channel("AMEN1", "MCEN2", "DP-64QAM")
        self.assertEqual(ctx.exception.code, "UNSUPPORTED_FORMAT")

    def test_infeasible_osnr_leaves_state(self):
        before = self.net.snapshot()
        with self.assertRaises(OpticalError) as ctx:
            self.net.provision_media_channel("MCEN1", "AMEN3", "DP-64QAM")
        self.assertEqual(ctx.exception.code, "INFEASIBLE_OSNR")
        self.assertIn("report", ctx.exception.details)
        self.assertEqual(self.net.snapshot(), before)

    def test_81st_channel_blocked(self):
        for _ in range(80):
            self.net.provision_media_channel("AMEN1", "MCEN1", "DP-QPSK")
        before = self.net.snapshot()
        with self.assertRaises(OpticalError) as ctx:
            self.net.provision_media_channel("AMEN1", "MCEN1", "DP-QPSK")
        self.assertEqual(ctx.exception.code, "OPTICAL_BLOCKED")
        self.assertEqual(self.net.snapshot(), before)

    def test_release_frees_index(self):
        channel = self.net.provision_media_channel("AMEN1", "MCEN1", "DP-16QAM")
        self.net.release_media_channel(channel.id)
        self.assertEqual(self.net.spectrum.occupancy[0], set())
        self.assertEqual(self.net.rules_for(channel.id), [])
        with self.assertRaises(OpticalError) as ctx:
            self.net.release_media_channel(channel.id)
        self.assertEqual(ctx.exception.code, "ALREADY_RELEASED")

    def test_unknown_channel(self):
        with self.assertRaises(OpticalError) as ctx:
            self.net.release_media_channel("mc-9999")
        self.assertEqual(ctx.exception.code, "UNKNOWN_CHANNEL")

    def test_first_fit_reuse(self):
        a = self.net.provision_media_channel("AMEN1", "MCEN1", "DP-QPSK")
        b = self.net.provision_media_channel("AMEN1", "MCEN1", "DP-QPSK")
        self.assertEqual(b.channel_index, 1)
        self.net.release_media_channel(a.id)
        c = self.net.provision_media_channel("AMEN1", "MCEN1", "DP-QPSK")
        self.assertEqual(c.channel_index, 0)

    def test_round_trip_restores_spectrum(self):
        before = self.net.snapshot()
        channel = self.net.provision_media_channel("AMEN1", "AMEN3", "DP-QPSK")
        self.assertEqual(channel.segments, (1, 2))
        self.net.discard_media_channel(channel.id)
        self.assertEqual(self.net.snapshot(), before)

    def test_best_feasible_format_falls_back(self):
        self.assertEqual(self.net.best_feasible_format("AMEN1", "MCEN1").name, "DP-64QAM")
        self.assertEqual(self.net.best_feasible_format("AMEN1", "AMEN2").name, "DP-16QAM")
        self.assertEqual(self.net.best_feasible_format("MCEN1", "MCEN2").name, "DP-QPSK")

    def test_spectrum_safety_fuzz(self):
        rng = np.random.default_rng(2024)
        nodes = list(self.net.topo.line)
        formats = list(FORMATS)
        active = {}
        for _ in range(10000):
            if active and rng.random() < 0.45:
                victim = sorted(active)[int(rng.integers(len(active)))]
                self.net.release_media_channel(victim)
                del active[victim]
            else:
                src, dst = rng.choice(len(nodes), size=2, replace=False)
                try:
                    channel = self.net.provision_media_channel(nodes[src], nodes[dst], formats[int(rng.integers(3))])
                except OpticalError:
                    pass
                else:
                    active[channel.id] = channel
            seen = {}
            for channel in active.values():
                for seg in channel.segments:
                    key = (seg, channel.channel_index)
                    self.assertNotIn(key, seen)
                    seen[key] = channel.id
                    self.assertIn(channel.channel_index, self.net.spectrum.occupancy[seg])
            self.assertEqual(len(seen), sum(len(v) for v in self.net.spectrum.occupancy.values()))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["MCEN1", "AMEN1", "AMEN2", "AMEN3", "MCEN2"]),
                              st.sampled_from(["MCEN1", "AMEN1", "AMEN2", "AMEN3", "MCEN2"])),
                    min_size=1, max_size=30))
    def test_failed_provision_is_atomic(self, requests):
        net = OpticalNetwork(demo5().with_channel_count(4))
        for src, dst in requests:
            before = net.snapshot()
            try:
                net.provision_media_channel(src, dst, "DP-16QAM")
            except OpticalError:
                self.assertEqual(net.snapshot(), before)


if __name__ == '__main__':
    unittest.main()
