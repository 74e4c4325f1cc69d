# load_sweep.py
"""
Blocking-versus-load sweeps: one provisioning experiment per offered load,
run in parallel, tabulated against the Erlang-B reference and plotted.
"""

import logging
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
from joblib import Parallel, delayed

from errors import WorkloadError
from topology import broadcast_segments
from workload import erlang_b, run_experiment

logger = logging.getLogger("load_sweep")

SWEEP_COLUMNS = ["offered_load_erlang", "arrival_rate_per_s", "offered_requests", "blocked",
                 "blocking_probability", "blocking_stderr", "spectrum_utilization", "mean_latency_ms",
                 "erlang_b"]


def _sweep_point(topo, load, mean_hold_s, requests, seed, demand_distribution):
    metrics = run_experiment(topo, load / mean_hold_s, mean_hold_s, requests=requests, seed=seed,
                             demand_distribution=demand_distribution)
    return {
        "offered_load_erlang": load,
        "arrival_rate_per_s": load / mean_hold_s,
        "offered_requests": metrics.offered_requests,
        "blocked": metrics.blocked,
        "blocking_probability": metrics.blocking_probability,
        "blocking_stderr": metrics.blocking_stderr,
        "spectrum_utilization": metrics.spectrum_utilization,
        "mean_latency_ms": metrics.mean_latency_ms,
    }


def run_load_sweep(topo, loads, mean_hold_s=1.0, requests=10000, seed=0, n_jobs=1, demand_distribution=None):
    """
    Run one experiment per offered load, all with the same seed.

    Args:
        topo (Topology): Network under study
        loads (list[float]): Offered loads in Erlang
        mean_hold_s (float): Mean holding time; arrival rate = load / hold
        requests (int): Arrivals per point
        seed (int): Seed shared by every point
        n_jobs (int): joblib worker count

    Returns:
        pd.DataFrame: One row per load in ascending order; erlang_b is NaN
            unless the topology forms a single broadcast segment
    """
    loads = sorted(float(x) for x in loads)
    if not loads or any(x <= 0 for x in loads):
        raise WorkloadError("INVALID_PARAMS", "loads must be a non-empty list of positive values",
                            {"loads": loads})
    if mean_hold_s <= 0:
        raise WorkloadError("INVALID_PARAMS", "mean_hold_s must be > 0", {"mean_hold_s": mean_hold_s})

    logger.info(f"📈 Sweeping {len(loads)} loads x {requests} requests (seed {seed}, jobs {n_jobs})")
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_point)(topo, load, mean_hold_s, requests, seed, demand_distribution) for load in loads
    )

    frame = pd.DataFrame(rows)
    if len(broadcast_segments(topo)) == 1:
        frame["erlang_b"] = [erlang_b(topo.grid.channel_count, load) for load in frame["offered_load_erlang"]]
    else:
        frame["erlang_b"] = float("nan")
    return frame[SWEEP_COLUMNS]


def write_sweep_csv(frame, path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.info(f"✅ Sweep table written to {path}")


def plot_blocking(frame, path, title="Blocking probability vs offered load"):
    """Simulated blocking with batch-means error bars, plus Erlang-B when present."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    plt.figure(figsize=(8, 5))
    plt.errorbar(frame["offered_load_erlang"], frame["blocking_probability"], yerr=frame["blocking_stderr"],
                 marker="o", capsize=3, label="Simulated")
    if frame["erlang_b"].notna().any():
        plt.plot(frame["offered_load_erlang"], frame["erlang_b"], linestyle="--", label="Erlang-B")
    plt.title(title)
    plt.xlabel("Offered load (Erlang)")
    plt.ylabel("Blocking probability")
    plt.grid(True, alpha=0.3)
    plt.legend()
    plt.tight_layout()
    plt.savefig(path)
    plt.close()
    logger.info(f"✅ Blocking plot saved to {path}")


def sweep_records(frame):
    """JSON-friendly rows (NaN becomes None)."""
    cleaned = frame.astype(object).where(frame.notna(), None)
    return cleaned.to_dict(orient="records")
