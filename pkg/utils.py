import json
import math


def generate_sequence_id(prefix, counter):
    """Create a zero-padded identifier such as mc-0001 or cs-0042."""
    return f"{prefix}-{counter:04d}"


def generate_sip_id(node_id, port, slot=None):
    """Create a SIP identifier for a node port (TRX slot or DC port)."""
    if slot is None:
        return f"SIP-{node_id}-{port}"
    return f"SIP-{node_id}-{port}{slot}"


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def canonical_json(obj, indent=2):
    """Serialize with sorted keys so equal documents are byte-equal."""
    return json.dumps(_json_safe(obj), sort_keys=True, indent=indent)
