"""Scenario presets for the published parameter sets.

Each preset is a list of plain config mappings (the same format a user would
write in YAML) so that they go through the regular loader.  Times are in us.
"""

from __future__ import annotations

import copy

import numpy as np

# experimental qubit and readout
GAMMA_DOWN = 1 / 22.5
GAMMA_UP = 1 / 56
GAMMA_D = 1 / 15.6
T_A = 184.0
T_A_ALT = 92.0
OMEGA_T_A = 200.0
DELTA_OVER_OMEGA = 1.7


def experimental_qubit(delta_over_omega: float = 0.0) -> dict:
    return {"omega_t_a": OMEGA_T_A, "delta_over_omega": delta_over_omega,
            "gamma_d_per_us": GAMMA_D, "gamma_up_per_us": GAMMA_UP,
            "gamma_down_per_us": GAMMA_DOWN}


def experimental_detector(t_a: float = T_A) -> dict:
    # K only enters through S_QQ, which the experimental generator does not use;
    # it is recorded as gamma_d * t_a for the report.
    return {"t_a_us": t_a, "k": GAMMA_D * t_a, "a_vq": 1.0}


def _fig1() -> list[dict]:
    return [{
        "name": "fig1", "model": "nondemolition", "observable": "x",
        "detector": {"t_a_us": 1.0, "k": 1.0},
        "initial_state": "Z+", "post_selectors": ["Z+", "Z-"],
        "gamma_t": [0.5], "o_range": [-4.0, 4.0],
    }]


def _fig2() -> list[dict]:
    return [{
        "name": "fig2", "model": "ideal", "observable": "x",
        "qubit": {"omega_t_a": OMEGA_T_A},
        "detector": {"t_a_us": 1.0, "k": 1.0},
        "initial_state": "Z+", "post_selectors": ["Z+", "Z-"], "frame_rotation": True,
        "t_over_ta": [0.1, 0.2, 0.5, 1.0, 2.0, 5.0], "o_range": [-4.0, 4.0],
    }]


def _fig3(t_a: float = T_A) -> list[dict]:
    return [{
        "name": "fig3", "model": "experimental", "observable": "x",
        "qubit": experimental_qubit(0.0), "detector": experimental_detector(t_a),
        "initial_state": "Z+", "post_selectors": ["Z+", "Z-"], "frame_rotation": True,
        "t_over_ta": [0.2, 0.5, 1.0, 2.0, 5.0], "o_range": [-4.0, 4.0],
        "sweep": {"quantity": "difference_max"},
    }]


def _fig4(t_a: float = T_A) -> list[dict]:
    return [{
        "name": "fig4", "model": "experimental", "observable": "x",
        "qubit": experimental_qubit(DELTA_OVER_OMEGA), "detector": experimental_detector(t_a),
        "initial_state": "Z+", "post_selectors": ["Z+", "Z-"], "frame_rotation": True,
        "t_over_ta": [0.2, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0], "o_range": [-4.0, 4.0],
        "sweep": {"quantity": "difference_max", "fit_shift": True},
    }]


def _fig5(t_a: float = T_A) -> list[dict]:
    out = []
    for tag, dlt in (("delta0", 0.0), ("delta1.7", DELTA_OVER_OMEGA)):
        out.append({
            "name": f"fig5_{tag}", "model": "experimental", "observable": "y",
            "qubit": experimental_qubit(dlt), "detector": experimental_detector(t_a),
            "initial_state": "Z+", "post_selectors": ["Z+", "Z-"],
            "omega_t": [0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        })
    return out


def _fig5_insets(t_a: float = T_A) -> list[dict]:
    out = []
    grid = [float(x) for x in np.round(np.geomspace(0.05, 2 * np.pi, 25), 6)]
    for cfg in _fig5(t_a):
        c = copy.deepcopy(cfg)
        c["name"] = cfg["name"] + "_means"
        c["omega_t"] = grid
        c["sweep"] = {"quantity": "mean"}
        out.append(c)
    return out


def _fig6(t_a: float = T_A) -> list[dict]:
    return [{
        "name": "fig6", "model": "experimental", "observable": "y",
        "qubit": experimental_qubit(0.0), "detector": experimental_detector(t_a),
        "initial_state": "Z+", "post_selectors": ["Z-"],
        "omega_t": [0.001, 0.003, 0.01, 0.03, 0.1, 0.3],
    }]


def _fig6_insets(t_a: float = T_A) -> list[dict]:
    c = copy.deepcopy(_fig6(t_a)[0])
    c["name"] = "fig6_means"
    c["omega_t"] = [float(x) for x in np.round(np.geomspace(1e-4, 1.0, 25), 8)]
    c["sweep"] = {"quantity": "mean"}
    return [c]


def _jump() -> list[dict]:
    # ideal detector, drive only, short windows in units of 1/(omega^2 t_a)
    omega_t_a = OMEGA_T_A
    return [{
        "name": "jump", "model": "ideal", "observable": "y",
        "qubit": {"omega_t_a": omega_t_a}, "detector": {"t_a_us": 1.0, "k": 1.0},
        "initial_state": "Z+", "post_selectors": ["Z-"],
        "t_values_us": [x / omega_t_a**2 for x in (0.25, 0.5, 1.0, 2.0, 4.0)],
    }]


def _broken() -> list[dict]:
    # detector below the quantum limit (K < 1): fails validation on purpose
    return [{
        "name": "broken", "model": "ideal", "observable": "x",
        "detector": {"t_a_us": 1.0, "k": 0.5},
        "initial_state": "Z+", "post_selectors": ["Z+", "Z-"], "t_over_ta": [1.0],
    }]


PRESETS = {
    "fig1": (_fig1, None),
    "fig2": (_fig2, None),
    "fig3": (_fig3, None),
    "fig4": (_fig4, None),
    "fig5": (_fig5, _fig5_insets),
    "fig6": (_fig6, _fig6_insets),
    "jump": (_jump, None),
    "broken": (_broken, None),
}


def preset(name: str, t_a: float = T_A) -> tuple[list[dict], list[dict]]:
    """(distribution configs, sweep configs) for a preset name."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    dist, sweeps = PRESETS[name]
    kw = {"t_a": t_a} if name in ("fig3", "fig4", "fig5", "fig6") else {}
    d = dist(**kw)
    s = []
    for c in d:
        if "sweep" in c:
            s.append(copy.deepcopy(c))
    if sweeps is not None:
        s.extend(sweeps(**kw))
    for c in d:
        c.pop("sweep", None)
    return d, s
