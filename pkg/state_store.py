# state_store.py
"""
Per-invocation network state on disk.

A state file holds the topology document and a journal of every mutating
request made against it. Loading replays the journal in order on a fresh
controller, so generated identifiers and resource choices come back exactly as
they were.
"""

import json
import logging
import os
from datetime import datetime, timezone

from control import ComController, handle_request
from errors import NetworkError, StateError
from nfv import Orchestrator, load_nsd
from topology import load_topology

logger = logging.getLogger("state_store")

STATE_VERSION = 1
STATE_FIELDS = {"version", "saved_at", "topology", "journal", "summary"}


class NetworkState:
    """Topology, COM controller and orchestrator rebuilt from one journal."""

    def __init__(self, topology_doc):
        self.topology_doc = topology_doc
        self.topo = load_topology(topology_doc)
        self.com = ComController(self.topo)
        self.orchestrator = Orchestrator(self.topo, self.com)
        self.journal = []

    def apply(self, entry):
        """
        Execute one journal entry and record it, whatever the outcome.

        Entries are {"target": "service", "request": {...}} with a northbound
        request document, or {"target": "slice", "operation": "create" |
        "delete", "slice_id": ..., "nsd": ..., "method": ...}.

        Returns:
            dict: Result document of the request
        """
        self.journal.append(entry)
        return self._execute(entry)

    def _execute(self, entry):
        target = entry.get("target")
        if target == "service":
            return handle_request(self.com, entry["request"])
        if target == "slice":
            if entry.get("operation") == "create":
                nsd = load_nsd(entry["nsd"])
                return self.orchestrator.instantiate_slice(entry["slice_id"], nsd,
                                                           entry.get("method", "auto")).to_dict()
            if entry.get("operation") == "delete":
                return self.orchestrator.teardown_slice(entry["slice_id"]).to_dict()
        raise StateError("PARSE_ERROR", "unrecognised journal entry", {"entry": entry})

    def replay(self, journal):
        for i, entry in enumerate(journal):
            if not isinstance(entry, dict):
                raise StateError("PARSE_ERROR", f"journal entry {i} is not an object", {"index": i})
            self.journal.append(entry)
            try:
                self._execute(entry)
            except StateError:
                raise
            except NetworkError as e:
                logger.debug("replayed failing entry %d: %s", i, e.code)
        logger.info(f"✅ Replayed {len(journal)} journal entries")

    def summary(self):
        return {
            "active_services": sum(1 for s in self.com.services.values() if s.state.value == "ACTIVE"),
            "active_channels": len(self.com.optical.active_channels()),
            "active_slices": sorted(sid for sid, s in self.orchestrator.slices.items() if s.state.value == "ACTIVE"),
            "spectrum_utilization": self.com.optical.spectrum_utilization(),
        }

    def to_dict(self):
        return {
            "version": STATE_VERSION,
            "saved_at": datetime.now(timezone.utc).isoformat(),
            "topology": self.topology_doc,
            "journal": list(self.journal),
            "summary": self.summary(),
        }


def read_json_file(path):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise StateError("PARSE_ERROR", f"malformed JSON in {path}: {e}", {"path": path})
    except OSError as e:
        raise StateError("PARSE_ERROR", f"cannot read {path}: {e}", {"path": path})


def new_state(topology_path):
    return NetworkState(read_json_file(topology_path))


def load_state(path, topology_path=None):
    """
    Rebuild the network state saved at path.

    A missing file starts fresh from topology_path. Malformed or unknown
    documents are rejected with PARSE_ERROR.

    Returns:
        NetworkState
    """
    if not os.path.exists(path):
        if topology_path is None:
            raise StateError("PARSE_ERROR", f"no state at {path} and no topology given", {"path": path})
        logger.info(f"🆕 No state at {path}, starting from {topology_path}")
        return new_state(topology_path)

    doc = read_json_file(path)
    if not isinstance(doc, dict) or set(doc) != STATE_FIELDS:
        raise StateError("PARSE_ERROR", f"{path} is not a state document", {"path": path})
    if doc["version"] != STATE_VERSION:
        raise StateError("PARSE_ERROR", f"unsupported state version {doc['version']}",
                         {"path": path, "version": doc["version"]})
    if not isinstance(doc["journal"], list):
        raise StateError("PARSE_ERROR", "journal must be a list", {"path": path})

    state = NetworkState(doc["topology"])
    state.replay(doc["journal"])
    return state


def save_state(state, path):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w") as f:
        json.dump(state.to_dict(), f, indent=2, sort_keys=True)
    os.replace(tmp_path, path)
    logger.info(f"💾 Saved state with {len(state.journal)} journal entries to {path}")
