"""Scenario configuration files.

Configs are YAML (JSON is accepted as well, and so is a JSON sidecar written
by a previous run).  Every dimensioned quantity carries a unit suffix:

    times        t_a_us, s_vv_us, dt_ns, t_values_ms, ...
    rates        gamma_d_per_us, s_qq_per_us, ...
    frequencies  omega_rad_per_us, delta_rad_per_us

Dimensionless alternatives: ``omega_t_a`` (omega * t_a), ``delta_over_omega``,
``t_over_ta``, ``gamma_t``, ``omega_t``.  All values are converted to the
config's ``time_unit`` (default ``us``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError
from .generator import Liouvillian, build_experimental, build_ideal, build_nondemolition
from .model import (
    IDENTITY,
    PAULI,
    DetectorParams,
    ObservableSpec,
    PostSelector,
    QubitParams,
    QubitState,
    make_post_selector,
)
from .statistics import ChiGridSpec

UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
MODELS = ("ideal", "experimental", "nondemolition", "two_detector")
QUANTITIES = ("mean", "cumulants", "difference_max")

_TOP_KEYS = {"name", "model", "time_unit", "observable", "qubit", "detector", "detector_y",
             "initial_state", "post_selectors", "frame_rotation", "grid", "o_range",
             "trajectories", "sweep", "t_values", "config", "tool_version", "derived",
             "files", "degraded", "residuals", "notes"}


# ---------------------------------------------------------------- source positions


class _Source:
    """Keeps YAML node positions so errors can name a line."""

    def __init__(self, text: str, path: str):
        self.path = path
        self.lines: dict[tuple, int] = {}
        try:
            node = yaml.compose(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f"{path}:{mark.line + 1}" if mark is not None else path
            raise ConfigError(f"{where}: cannot parse config: {exc}") from None
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, prefix):
        self.lines[prefix] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.lines[prefix + (k.value,)] = k.start_mark.line + 1
                self._walk(v, prefix + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, prefix + (i,))

    def error(self, path: tuple, msg: str) -> ConfigError:
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p)
        field_name = ".".join(str(x) for x in path) or "<root>"
        where = f"{self.path}:{line}" if line else self.path
        return ConfigError(f"{where}: {field_name}: {msg}")


# ---------------------------------------------------------------- unit handling


def _number(src: _Source, path, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise src.error(path, f"expected a number, got {value!r}")
    x = float(value)
    if not math.isfinite(x):
        raise src.error(path, "value must be finite")
    return x


def _split_unit(key: str):
    """('gamma_d', 'rate', 'us') for gamma_d_per_us; ('t_a', 'time', 'ms') for t_a_ms."""
    for u in UNITS:
        if key.endswith("_rad_per_" + u):
            return key[: -len("_rad_per_" + u)], "rate", u
        if key.endswith("_per_" + u):
            return key[: -len("_per_" + u)], "rate", u
        if key.endswith("_" + u):
            return key[: -len("_" + u)], "time", u
    return key, None, None


def _unit_values(src: _Source, path: tuple, block: dict, time_unit: str,
                 allowed: dict[str, str], dimensionless: set[str]) -> dict[str, float]:
    """Convert a mapping of suffixed keys to numbers in ``time_unit``."""
    tu = UNITS[time_unit]
    out: dict[str, float] = {}
    for key, value in block.items():
        p = path + (key,)
        if key in dimensionless:
            out[key] = _number(src, p, value)
            continue
        base, kind, unit = _split_unit(key)
        if kind is None:
            if key in allowed:
                raise src.error(p, f"'{key}' needs a unit suffix, e.g. {_example(key, allowed)}")
            raise src.error(p, "unknown field")
        if base not in allowed:
            raise src.error(p, "unknown field")
        if allowed[base] != kind:
            raise src.error(p, f"'{base}' is a {allowed[base]}, not a {kind}")
        if base in out:
            raise src.error(p, f"'{base}' given twice")
        x = _number(src, p, value)
        factor = UNITS[unit] / tu
        out[base] = x * factor if kind == "time" else x / factor
    return out


def _example(key, allowed):
    return f"{key}_us" if allowed[key] == "time" else f"{key}_per_us"


def _time_list(src: _Source, path, value, factor: float) -> list[float]:
    vals = value if isinstance(value, list) else [value]
    if not vals:
        raise src.error(path, "empty list")
    return [_number(src, path + (i,), v) * factor for i, v in enumerate(vals)]


# ---------------------------------------------------------------- scenario


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    model: str
    time_unit: str
    observable: ObservableSpec
    observable_label: str
    qubit: QubitParams
    detector: DetectorParams
    detector_y: DetectorParams | None
    initial_state: QubitState
    initial_label: str
    post_selectors: list
    post_labels: list
    t_values: list
    frame_rotation: bool
    grid: ChiGridSpec
    o_range: tuple | None
    trajectories: dict | None
    sweep: dict | None
    echo: dict = field(repr=False)

    def liouvillian(self) -> Liouvillian:
        if self.model == "ideal":
            return build_ideal(self.observable, self.detector, self.qubit.hamiltonian())
        if self.model == "experimental":
            return build_experimental(self.observable, self.qubit, self.detector)
        if self.model == "nondemolition":
            return build_nondemolition(self.observable, self.detector)
        raise ValueError("two_detector scenarios use joint_liouvillian()")

    def joint_liouvillian(self):
        from .generator import build_two_detector

        return build_two_detector(self.qubit, self.detector, self.detector_y or self.detector,
                                  ideal=self.echo.get("two_detector_ideal", True))

    def hamiltonian(self) -> np.ndarray:
        if self.model == "nondemolition":
            return np.zeros((2, 2), complex)
        return self.qubit.hamiltonian()


_QUBIT_FIELDS = {"omega": "rate", "delta": "rate", "gamma_d": "rate", "gamma_up": "rate",
                 "gamma_down": "rate"}
_QUBIT_DIMLESS = {"omega_t_a", "delta_over_omega"}
_DET_FIELDS = {"t_a": "time", "s_vv": "time", "s_qq": "rate"}
_DET_DIMLESS = {"k", "a_vq", "a_qv", "s_qv"}


def _detector(src, path, block, time_unit) -> DetectorParams:
    if not isinstance(block, dict):
        raise src.error(path, "expected a mapping")
    v = _unit_values(src, path, block, time_unit, _DET_FIELDS, _DET_DIMLESS)
    a = v.get("a_vq", 1.0)
    try:
        if "s_vv" in v and "s_qq" in v:
            if "t_a" in v or "k" in v:
                raise src.error(path, "give either (t_a, k) or (s_vv, s_qq), not both")
            return DetectorParams(v["s_qq"], v["s_vv"], v.get("s_qv", 0.0), a, v.get("a_qv", 0.0))
        if "t_a" not in v:
            raise src.error(path, "missing t_a (or s_vv and s_qq)")
        return DetectorParams.from_acquisition_time(v["t_a"], v.get("k", 1.0), a,
                                                    v.get("s_qv", 0.0), v.get("a_qv", 0.0))
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise src.error(path, str(exc)) from None


def _qubit(src, path, block, time_unit, t_a: float) -> QubitParams:
    block = block or {}
    if not isinstance(block, dict):
        raise src.error(path, "expected a mapping")
    v = _unit_values(src, path, block, time_unit, _QUBIT_FIELDS, _QUBIT_DIMLESS)
    if "omega_t_a" in v:
        if "omega" in v:
            raise src.error(path + ("omega_t_a",), "omega given twice")
        v["omega"] = v.pop("omega_t_a") / t_a
    if "delta_over_omega" in v:
        if "delta" in v:
            raise src.error(path + ("delta_over_omega",), "delta given twice")
        v["delta"] = v.pop("delta_over_omega") * v.get("omega", 0.0)
    try:
        return QubitParams(**{k: v.get(k, 0.0) for k in _QUBIT_FIELDS})
    except ValueError as exc:
        raise src.error(path, str(exc)) from None


def _state(src, path, value):
    if isinstance(value, str):
        try:
            return QubitState.pure(value), value
        except (ValueError, KeyError):
            raise src.error(path, f"unknown state label {value!r}") from None
    if isinstance(value, dict) and set(value) == {"bloch"}:
        r = [_number(src, path + ("bloch", i), x) for i, x in enumerate(value["bloch"])]
        try:
            return QubitState.from_bloch(r), f"bloch{tuple(r)}"
        except ValueError as exc:
            raise src.error(path, str(exc)) from None
    raise src.error(path, "expected a state label (Z+, X-, ...) or {bloch: [x, y, z]}")


def _selector(src, path, value):
    if value is None or (isinstance(value, str) and value.lower() in ("none", "identity")):
        return None, "unconditioned"
    if isinstance(value, str):
        try:
            return make_post_selector(value), value
        except (ValueError, KeyError):
            raise src.error(path, f"unknown state label {value!r}") from None
    if isinstance(value, dict) and set(value) == {"faulty"}:
        f = value["faulty"]
        if not (isinstance(f, list) and len(f) == 3):
            raise src.error(path, "faulty expects [state, error_state, p_e]")
        try:
            p = make_post_selector(faulty=(f[0], f[1], _number(src, path, f[2])))
        except (ValueError, KeyError) as exc:
            raise src.error(path, str(exc)) from None
        return p, p.label
    raise src.error(path, "expected a state label, 'none', or {faulty: [psi1, psi2, p_e]}")


def _observable(src, path, value):
    if isinstance(value, str):
        if value.lower() not in PAULI:
            raise src.error(path, f"unknown observable {value!r}; use x, y or z")
        return ObservableSpec.pauli(value), value.lower()
    if isinstance(value, list):
        try:
            m = np.array([[complex(x) for x in row] for row in value])
            return ObservableSpec(m), "custom"
        except (ValueError, TypeError) as exc:
            raise src.error(path, str(exc)) from None
    raise src.error(path, "expected x, y, z or a 2x2 matrix")


def _t_values(src, raw, time_unit, d: DetectorParams, q: QubitParams) -> list[float]:
    keys = [k for k in raw if k.startswith("t_values")]
    alt = [k for k in ("t_over_ta", "gamma_t", "omega_t") if k in raw]
    if len(keys) + len(alt) != 1:
        raise src.error((), "give exactly one of t_values_<unit>, t_over_ta, gamma_t, omega_t")
    if keys:
        key = keys[0]
        unit = key[len("t_values_"):] if key != "t_values" else None
        if unit not in UNITS:
            raise src.error((key,), "t_values needs a unit suffix, e.g. t_values_us")
        t = _time_list(src, (key,), raw[key], UNITS[unit] / UNITS[time_unit])
    else:
        key = alt[0]
        if key == "t_over_ta":
            scale = d.t_a
        elif key == "gamma_t":
            if not d.gamma > 0:
                raise src.error((key,), "gamma_t needs a detector with s_qq > 0")
            scale = 1 / d.gamma
        else:
            if not q.omega:
                raise src.error((key,), "omega_t needs a nonzero omega")
            scale = 1 / abs(q.omega)
        t = _time_list(src, (key,), raw[key], scale)
    for i, x in enumerate(t):
        if not x > 0:
            raise src.error((key, i), "measurement times must be positive")
    return t


def _grid(src, raw) -> tuple[ChiGridSpec, tuple | None]:
    g = raw.get("grid") or {}
    if not isinstance(g, dict):
        raise src.error(("grid",), "expected a mapping")
    allowed = {"n_points", "chi_max", "max_o", "resolution"}
    for k in g:
        if k not in allowed:
            raise src.error(("grid", k), "unknown field")
    try:
        spec = ChiGridSpec(n_points=g.get("n_points"), chi_max=g.get("chi_max", "auto"),
                           max_o=g.get("max_o"), resolution=g.get("resolution", 20.0))
    except ValueError as exc:
        raise src.error(("grid",), str(exc)) from None
    o_range = raw.get("o_range")
    if o_range is not None:
        if not (isinstance(o_range, list) and len(o_range) == 2):
            raise src.error(("o_range",), "expected [lo, hi]")
        lo, hi = (_number(src, ("o_range", i), x) for i, x in enumerate(o_range))
        if not lo < hi:
            raise src.error(("o_range",), "need lo < hi")
        o_range = (lo, hi)
    return spec, o_range


def _trajectories(src, raw, time_unit) -> dict | None:
    t = raw.get("trajectories")
    if t is None:
        return None
    if not isinstance(t, dict):
        raise src.error(("trajectories",), "expected a mapping")
    out = {"n_traj": 100_000, "seed": 0, "dt": None, "bins": 100, "dump_records": False}
    for k, v in t.items():
        p = ("trajectories", k)
        if k in ("n_traj", "seed", "bins"):
            if isinstance(v, bool) or not isinstance(v, int) or v < (0 if k == "seed" else 1):
                raise src.error(p, "expected a positive integer")
            out[k] = v
        elif k == "dump_records":
            out[k] = bool(v)
        else:
            base, kind, unit = _split_unit(k)
            if base != "dt" or kind != "time":
                raise src.error(p, "unknown field (dt needs a unit suffix, e.g. dt_us)")
            out["dt"] = _number(src, p, v) * UNITS[unit] / UNITS[time_unit]
    return out


def _sweep(src, raw) -> dict | None:
    s = raw.get("sweep")
    if s is None:
        return None
    if not isinstance(s, dict):
        raise src.error(("sweep",), "expected a mapping")
    q = s.get("quantity", "mean")
    if q not in QUANTITIES:
        raise src.error(("sweep", "quantity"), f"expected one of {QUANTITIES}")
    out = {"quantity": q}
    for k, v in s.items():
        if k not in ("quantity", "fit_shift"):
            raise src.error(("sweep", k), "unknown field")
    out["fit_shift"] = bool(s.get("fit_shift", False))
    return out


def parse_config(raw: Any, src: _Source | None = None) -> ScenarioConfig:
    """Validate a config mapping (already parsed from YAML/JSON)."""
    src = src or _Source("", "<config>")
    if isinstance(raw, dict) and "config" in raw and isinstance(raw["config"], dict):
        # sidecar written by a previous run
        inner = _Source(yaml.safe_dump(raw["config"], sort_keys=False), src.path)
        return parse_config(raw["config"], inner)
    if not isinstance(raw, dict):
        raise src.error((), "config must be a mapping")
    for k in raw:
        if k not in _TOP_KEYS and not k.startswith("t_values") and \
                k not in ("t_over_ta", "gamma_t", "omega_t", "two_detector_ideal"):
            raise src.error((k,), "unknown field")
    model = raw.get("model")
    if model not in MODELS:
        raise src.error(("model",), f"expected one of {MODELS}")
    time_unit = raw.get("time_unit", "us")
    if time_unit not in UNITS:
        raise src.error(("time_unit",), f"expected one of {tuple(UNITS)}")
    if "detector" not in raw:
        raise src.error((), "missing detector")
    d = _detector(src, ("detector",), raw["detector"], time_unit)
    dy = _detector(src, ("detector_y",), raw["detector_y"], time_unit) \
        if raw.get("detector_y") is not None else None
    q = _qubit(src, ("qubit",), raw.get("qubit"), time_unit, d.t_a)
    if model == "two_detector":
        obs, obs_label = ObservableSpec.pauli("x"), "x,y"
    else:
        obs, obs_label = _observable(src, ("observable",), raw.get("observable", "x"))
    rho0, rho_label = _state(src, ("initial_state",), raw.get("initial_state", "Z+"))
    posts = raw.get("post_selectors", ["none"])
    if not isinstance(posts, list) or not 1 <= len(posts) <= 2:
        raise src.error(("post_selectors",), "expected a list of one or two post-selectors")
    sel = [_selector(src, ("post_selectors", i), p) for i, p in enumerate(posts)]
    t_values = _t_values(src, raw, time_unit, d, q)
    frame = raw.get("frame_rotation", False)
    if not isinstance(frame, bool):
        raise src.error(("frame_rotation",), "expected true or false")
    grid, o_range = _grid(src, raw)
    traj = _trajectories(src, raw, time_unit)
    sweep = _sweep(src, raw)
    name = str(raw.get("name", model))
    cfg = ScenarioConfig(
        name=name, model=model, time_unit=time_unit, observable=obs,
        observable_label=obs_label, qubit=q, detector=d, detector_y=dy,
        initial_state=rho0, initial_label=rho_label,
        post_selectors=[s[0] for s in sel], post_labels=[s[1] for s in sel],
        t_values=t_values, frame_rotation=frame, grid=grid, o_range=o_range,
        trajectories=traj, sweep=sweep, echo={})
    object.__setattr__(cfg, "echo", canonical(cfg, raw))
    return cfg


def _det_echo(d: DetectorParams, u: str) -> dict:
    return {f"s_qq_per_{u}": d.s_qq, f"s_vv_{u}": d.s_vv, "s_qv": d.s_qv, "a_vq": d.a_vq,
            "a_qv": d.a_qv}


def canonical(cfg: ScenarioConfig, raw: dict) -> dict:
    """Resolved config in internal units; loading it reproduces the same run."""
    u = cfg.time_unit
    q = cfg.qubit
    out: dict[str, Any] = {
        "name": cfg.name, "model": cfg.model, "time_unit": u,
        "qubit": {f"omega_rad_per_{u}": q.omega, f"delta_rad_per_{u}": q.delta,
                  f"gamma_d_per_{u}": q.gamma_d, f"gamma_up_per_{u}": q.gamma_up,
                  f"gamma_down_per_{u}": q.gamma_down},
        "detector": _det_echo(cfg.detector, u),
    }
    if cfg.detector_y is not None:
        out["detector_y"] = _det_echo(cfg.detector_y, u)
    if "two_detector_ideal" in raw:
        out["two_detector_ideal"] = bool(raw["two_detector_ideal"])
    out["observable"] = raw.get("observable", "x") if cfg.model != "two_detector" else "x"
    out["initial_state"] = raw.get("initial_state", "Z+")
    out["post_selectors"] = raw.get("post_selectors", ["none"])
    out[f"t_values_{u}"] = list(cfg.t_values)
    out["frame_rotation"] = cfg.frame_rotation
    g = {"n_points": cfg.grid.n_points, "chi_max": cfg.grid.chi_max,
         "max_o": cfg.grid.max_o, "resolution": cfg.grid.resolution}
    out["grid"] = {k: v for k, v in g.items() if v is not None}
    if cfg.o_range is not None:
        out["o_range"] = list(cfg.o_range)
    if cfg.trajectories is not None:
        t = dict(cfg.trajectories)
        dt = t.pop("dt")
        if dt is not None:
            t[f"dt_{u}"] = dt
        out["trajectories"] = t
    if cfg.sweep is not None:
        out["sweep"] = dict(cfg.sweep)
    return out


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    src = _Source(text, str(path))
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise src.error((), f"cannot parse config: {exc}") from None
    return parse_config(raw, src)


def dumps_config(raw: dict) -> str:
    return yaml.safe_dump(raw, sort_keys=False)


def selector_op(p: PostSelector | None) -> np.ndarray:
    return IDENTITY if p is None else p.op


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"
