"""Random wire-message generator shared by gateway and acceptance tests."""

import numpy as np

_TYPES = ("hello", "view_list", "frame", "plot_data", "sim_state",
          "input", "error", "hover_info")
_INPUT_KINDS = ("tool", "drag", "click", "hover", "layer_toggle",
                "sim_control", "item_edit")
_WORDS = ("alpha", "beta", "gamma", "delta", "node", "layer", "view",
          "entropy", "cloud", "x", "y", "t", "s", "")


def rand_scalar(rng):
    k = rng.integers(0, 6)
    if k == 0:
        return int(rng.integers(-10**9, 10**9))
    if k == 1:
        return float(rng.normal(0, 1e3))
    if k == 2:
        return bool(rng.integers(0, 2))
    if k == 3:
        return None
    if k == 4:
        return _WORDS[rng.integers(0, len(_WORDS))]
    return "uéβ" + str(rng.integers(0, 100))


def rand_value(rng, depth=0):
    if depth >= 3:
        return rand_scalar(rng)
    k = rng.integers(0, 8)
    if k == 0:
        return [rand_value(rng, depth + 1) for _ in range(rng.integers(0, 5))]
    if k == 1:
        return {f"k{rng.integers(0, 50)}": rand_value(rng, depth + 1)
                for _ in range(rng.integers(0, 5))}
    return rand_scalar(rng)


def _extra_fields(rng, msg):
    for _ in range(rng.integers(0, 3)):
        msg[f"x_{rng.integers(0, 1000)}"] = rand_value(rng)
    return msg


def random_wire_message(rng):
    mtype = _TYPES[rng.integers(0, len(_TYPES))]
    if mtype == "hello":
        msg = {"type": "hello", "protocol_version": int(rng.integers(0, 5))}
    elif mtype == "view_list":
        msg = {"type": "view_list",
               "views": [{"view_id": f"view-{i}", "title": _WORDS[rng.integers(0, 8)],
                          "kind": "content2d"} for i in range(rng.integers(0, 4))]}
    elif mtype == "frame":
        layers = []
        for i in range(rng.integers(0, 4)):
            layers.append({
                "layer_id": f"layer-{i}",
                "name": _WORDS[rng.integers(0, len(_WORDS))],
                "visible": bool(rng.integers(0, 2)),
                "reserved": "none",
                "items": [rand_value(rng, 2) for _ in range(rng.integers(0, 3))],
            })
        msg = {"type": "frame", "view_id": f"view-{rng.integers(0, 5)}",
               "seq": int(rng.integers(0, 10**6)), "view_kind": "content2d",
               "layers": layers}
    elif mtype == "plot_data":
        msg = {"type": "plot_data", "series": _WORDS[rng.integers(0, 8)],
               "x": float(rng.normal()), "y": float(rng.normal())}
    elif mtype == "sim_state":
        msg = {"type": "sim_state",
               "state": ["Idle", "Running", "Paused", "Cancelled", "Completed"][rng.integers(0, 5)],
               "step_count": int(rng.integers(0, 10**7)),
               "sim_time_ms": float(abs(rng.normal(0, 1e4)))}
    elif mtype == "input":
        msg = {"type": "input", "kind": _INPUT_KINDS[rng.integers(0, len(_INPUT_KINDS))],
               "view_id": f"view-{rng.integers(0, 5)}",
               "payload": rand_value(rng, 1)}
    elif mtype == "error":
        msg = {"type": "error", "code": _WORDS[rng.integers(0, 8)] or "E",
               "detail": _WORDS[rng.integers(0, len(_WORDS))]}
    else:
        msg = {"type": "hover_info", "view_id": f"view-{rng.integers(0, 5)}",
               "x": float(rng.normal()), "y": float(rng.normal()),
               "item_id": None if rng.random() < 0.5 else f"item-{rng.integers(0, 9)}",
               "metadata": {str(k): _WORDS[rng.integers(0, 8)]
                            for k in range(rng.integers(0, 3))}}
    return _extra_fields(rng, msg)
