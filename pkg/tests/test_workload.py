# tests/test_workload.py
import math
import os
import tempfile
import unittest
from unittest import mock

import pandas as pd

import workload
from control import ComController
from errors import WorkloadError
from tests.helpers import chain, demo5, two_node
from workload import (CameraKind, FlowKind, LatencyParams, compute_latency, erlang_b, generate_scenario,
                      path_latency, run_experiment)

PARAMS = LatencyParams.from_config()


class TestScenario(unittest.TestCase):

    def test_three_by_150(self):
        scenario = generate_scenario(demo5(), 150, 0.1, 4.0, seed=3)
        self.assertEqual(len(scenario.cameras), 450)
        for amen in ("AMEN1", "AMEN2", "AMEN3"):
            self.assertEqual(scenario.aggregate_mbps(amen), 600.0)
            self.assertEqual(len(scenario.cameras_at(amen)), 150)
        self.assertEqual(scenario.warnings, [])
        self.assertEqual(sum(1 for c in scenario.cameras if c.kind == CameraKind.PTZ), 45)

    def test_zero_cameras(self):
        scenario = generate_scenario(demo5(), 0, 0.1, seed=1)
        self.assertEqual(scenario.cameras, [])
        self.assertEqual(scenario.flows, [])

    def test_deterministic(self):
        first = generate_scenario(demo5(), 120, 0.2, seed=42).to_json()
        second = generate_scenario(demo5(), 120, 0.2, seed=42).to_json()
        self.assertEqual(first, second)
        self.assertNotEqual(first, generate_scenario(demo5(), 120, 0.2, seed=43).to_json())

    def test_out_of_range_warns(self):
        scenario = generate_scenario(demo5(), 300, 0.1, seed=1)
        self.assertEqual(len(scenario.warnings), 1)
        self.assertEqual(len(scenario.cameras), 900)

    def test_ptz_flows_carry_bound(self):
        scenario = generate_scenario(demo5(), 150, 0.5, seed=9)
        ptz = [f for f in scenario.flows if f.kind == FlowKind.PTZ_CONTROL]
        self.assertEqual(len(ptz), 3 * 75)
        self.assertTrue(all(f.max_latency_ms == 20.0 for f in ptz))

    def test_invalid_params(self):
        for kwargs in ({"cameras_per_amen": -1, "ptz_fraction": 0.1},
                       {"cameras_per_amen": 10, "ptz_fraction": 1.5},
                       {"cameras_per_amen": 10, "ptz_fraction": 0.1, "stream_mbps": 0}):
            with self.assertRaises(WorkloadError) as ctx:
                generate_scenario(demo5(), **kwargs)
            self.assertEqual(ctx.exception.code, "INVALID_PARAMS")

    def test_cameras_frame(self):
        frame = generate_scenario(demo5(), 100, 0.1, seed=2).cameras_frame()
        self.assertEqual(list(frame.columns), ["id", "kind", "attached_node", "stream_mbps"])
        self.assertEqual(len(frame), 300)


class TestLatency(unittest.TestCase):

    def setUp(self):
        self.topo = chain([30, 30, 40])

    def test_hundred_km_two_interior(self):
        self.assertEqual(compute_latency(self.topo, ["M1", "A1", "A2", "M2"], PARAMS), 0.52)

    def test_zero_length(self):
        self.assertEqual(compute_latency(self.topo, ["A1"], PARAMS), 0.0)

    def test_processing_adds(self):
        latency = compute_latency(self.topo, ["M1", "A1", "A2", "M2"], PARAMS, processing=["ANALYTICS"])
        self.assertAlmostEqual(latency, 5.52, places=12)

    def test_not_adjacent(self):
        with self.assertRaises(WorkloadError) as ctx:
            compute_latency(self.topo, ["M1", "A2"], PARAMS)
        self.assertEqual(ctx.exception.code, "NO_PATH")

    def test_additivity(self):
        whole = compute_latency(self.topo, ["M1", "A1", "A2", "M2"], PARAMS)
        left = compute_latency(self.topo, ["M1", "A1", "A2"], PARAMS)
        right = compute_latency(self.topo, ["A2", "M2"], PARAMS)
        junction = PARAMS.per_node_switching_us / 1000.0
        self.assertAlmostEqual(whole, left + right + junction, places=12)

    def test_edge_versus_central_analytics(self):
        topo = demo5()
        edge = path_latency(topo, "AMEN2", "AMEN2", PARAMS)
        central = path_latency(topo, "AMEN2", "MCEN1", PARAMS)
        predicted = (80 + 40) * PARAMS.propagation_us_per_km / 1000.0 + PARAMS.per_node_switching_us / 1000.0
        self.assertEqual(edge, 0.0)
        self.assertAlmostEqual(central - edge, predicted, places=15)

    def test_negative_params_rejected(self):
        with self.assertRaises(WorkloadError):
            LatencyParams(-1.0, 10.0, {})


class TestErlangB(unittest.TestCase):

    def test_reference_value(self):
        self.assertAlmostEqual(erlang_b(10, 5.0), 0.0184, places=4)
        self.assertEqual(erlang_b(0, 3.0), 1.0)


class TestExperiment(unittest.TestCase):

    def test_light_load_never_blocks(self):
        metrics = run_experiment(demo5(), 0.001, 1.0, requests=500, seed=1)
        self.assertEqual(metrics.blocking_probability, 0.0)
        self.assertEqual(metrics.accepted, 500)

    def test_histogram_sums_to_accepted(self):
        metrics = run_experiment(demo5(), 50.0, 1.0, requests=3000, seed=4)
        self.assertEqual(sum(b["count"] for b in metrics.latency_histogram), metrics.accepted)
        self.assertTrue(0.0 <= metrics.blocking_probability <= 1.0)
        self.assertTrue(0.0 <= metrics.spectrum_utilization <= 1.0)
        self.assertEqual(metrics.offered_load_erlang, 50.0)
        self.assertIsNone(metrics.erlang_b_reference)

    def test_same_seed_same_metrics(self):
        first = run_experiment(demo5(), 30.0, 2.0, requests=2000, seed=1).to_json()
        second = run_experiment(demo5(), 30.0, 2.0, requests=2000, seed=1).to_json()
        self.assertEqual(first, second)

    def test_duration_mode(self):
        metrics = run_experiment(demo5(), 10.0, 1.0, duration_s=50.0, seed=2)
        self.assertGreater(metrics.offered_requests, 0)

    def test_requests_xor_duration(self):
        with self.assertRaises(WorkloadError):
            run_experiment(demo5(), 1.0, 1.0, requests=10, duration_s=10.0)
        with self.assertRaises(WorkloadError):
            run_experiment(demo5(), 0.0, 1.0, requests=10)

    def test_unsupported_demand_is_blocked_by_cause(self):
        metrics = run_experiment(demo5(), 1.0, 1.0, requests=400, seed=8, demand_distribution={"DP-64QAM": 1.0})
        self.assertIn("UNSUPPORTED_FORMAT", metrics.blocked_by_cause)
        self.assertEqual(sum(metrics.blocked_by_cause.values()), metrics.blocked)

    def test_histogram_csv(self):
        metrics = run_experiment(demo5(), 5.0, 1.0, requests=200, seed=3)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "latency.csv")
            metrics.write_histogram_csv(path)
            frame = pd.read_csv(path)
        self.assertEqual(list(frame.columns), ["bucket_ms_low", "bucket_ms_high", "count"])
        self.assertEqual(int(frame["count"].sum()), metrics.accepted)

    def test_ended_services_are_not_kept(self):
        controllers = []

        class RecordingController(ComController):
            def __init__(self, *args, **kwargs):
                super().__init__(*args, **kwargs)
                controllers.append(self)

        with mock.patch.object(workload, "ComController", RecordingController):
            metrics = run_experiment(two_node(channel_count=10), 8.0, 1.0, requests=5000, seed=4)
        self.assertGreater(metrics.blocked, 0)
        com = controllers[0]
        active = com.optical.active_channels()
        self.assertLessEqual(len(active), 10)
        self.assertEqual(len(com.optical.channels), len(active))
        self.assertEqual(len(com.services), len(active))

    def test_erlang_b_agreement(self):
        topo = two_node(channel_count=10)
        first = run_experiment(topo, 5.0, 1.0, requests=200_000, seed=1)
        self.assertAlmostEqual(first.erlang_b_reference, 0.0184, places=4)
        self.assertLess(abs(first.blocking_probability - 0.0184), 0.003)

        second = run_experiment(topo, 5.0, 1.0, requests=200_000, seed=2)
        spread = 3 * math.hypot(first.blocking_stderr, second.blocking_stderr)
        self.assertLessEqual(abs(first.blocking_probability - second.blocking_probability), max(spread, 1e-3))


if __name__ == '__main__':
    unittest.main()
