# configure.py

import json
import os

from dotenv import load_dotenv

load_dotenv()

# Run-level settings
LOG_LEVEL = os.getenv("METRO_LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("METRO_LOG_FILE", os.path.join("logs", "horseshoe.log"))
RESULTS_DIR = os.getenv("METRO_RESULTS_DIR", "results")
CONFIG_PATH = os.getenv("METRO_CONFIG")

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
DEFAULT_TOPOLOGY = os.path.join(DATA_DIR, "demo5.json")
DEFAULT_VNF_CATALOG = os.path.join(DATA_DIR, "vnf_catalog.json")

# Spectrum grid used when a topology document omits it
GRID_DEFAULTS = {
    "channel_count": 80,
    "channel_spacing_ghz": 50.0,
    "base_frequency_thz": 191.6,
}
DEFAULT_LOSS_DB_PER_KM = 0.2
SPAN_LENGTH_RANGE_KM = (20.0, 200.0)

# Optical impairments (all dB unless noted)
IMPAIRMENTS = {
    "splitter_db": 3.5,
    "blocker_db": 7.0,
    "edfa_nf_db": 5.5,
    "soa_nf_db": 7.0,
    "osnr_constant_db": 58.0,
    "launch_power_dbm": 0.0,
}

# name -> (baud GBd, net rate Gb/s, required OSNR dB @ 0.1 nm)
FORMATS = {
    "DP-QPSK": {"baud_gbaud": 30.0, "net_rate_gbps": 100.0, "required_osnr_db": 14.0},
    "DP-16QAM": {"baud_gbaud": 30.0, "net_rate_gbps": 200.0, "required_osnr_db": 21.0},
    "DP-64QAM": {"baud_gbaud": 30.0, "net_rate_gbps": 300.0, "required_osnr_db": 27.0},
}

VENDOR_FORMATS = {
    "A": ("DP-QPSK", "DP-16QAM"),
    "B": ("DP-QPSK", "DP-16QAM", "DP-64QAM"),
}
VENDOR_SLOTS = {"A": 2, "B": 1}
VENDOR_OPENCONFIG_NATIVE = {"A": True, "B": False}

# Control layer identifier pools
VLAN_RANGE = (2, 4094)
VNI_RANGE = (1, 2 ** 24 - 1)

# Workload and latency model
WORKLOAD = {
    "stream_mbps": 4.0,
    "archive_mbps_per_stream": 8.0,
    "archive_streams_per_amen": 4,
    "ptz_control_mbps": 0.1,
    "ptz_max_latency_ms": 20.0,
    "thermal_fraction": 0.2,
    "cameras_per_server_range": (100, 250),
}
LATENCY = {
    "propagation_us_per_km": 5.0,
    "per_node_switching_us": 10.0,
    "vnf_processing_ms": {"ANALYTICS": 5.0, "CSS": 2.0, "CSM": 1.0},
}
EXPERIMENT = {
    "histogram_bucket_ms": 0.1,
    "batches": 20,
}

# Placement solver switches to greedy above these sizes
EXACT_MAX_VNFS = 8
EXACT_MAX_DCS = 6


def _merge(target, overrides):
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(target.get(key), dict):
            _merge(target[key], value)
        else:
            target[key] = value


def load_overrides(path):
    """
    Apply a JSON override file on top of the defaults above.

    Args:
        path (str): JSON file with any of the keys impairments, formats,
            workload, latency, experiment

    Returns:
        dict: The parsed override document
    """
    with open(path, "r") as f:
        doc = json.load(f)

    _merge(IMPAIRMENTS, doc.get("impairments", {}))
    _merge(FORMATS, doc.get("formats", {}))
    _merge(WORKLOAD, doc.get("workload", {}))
    _merge(LATENCY, doc.get("latency", {}))
    _merge(EXPERIMENT, doc.get("experiment", {}))
    return doc


if CONFIG_PATH and os.path.exists(CONFIG_PATH):
    load_overrides(CONFIG_PATH)
