"""JSON configuration: schema validation and construction of library objects.

Every validation failure raises ConfigError naming the JSON path of the
offending value (e.g. "model.sigma_q"), before any computation starts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationSpec
from .detector import WindowConfig
from .errors import ConfigError
from .model import ChangeSpec, ModelParams
from .monitor import POLICY_NAMES, Policy, Scenario
from .sampler import AlphaSchedule
from .scenarios import (
    DEFAULT_ALPHA_SCHEDULE,
    benchmark_p10_model,
    benchmark_p30_model,
    single_dim_shift,
)

__all__ = ["Config", "load_config", "parse_config"]

_SECTIONS = ("model", "window", "policy", "sampling", "experiment", "io", "calibration")

_REQUIRED = object()


def _require(obj: dict, key: str, path: str, types, default=_REQUIRED):
    if key not in obj:
        if default is not _REQUIRED:
            return default
        raise ConfigError(f"{path}.{key}: missing required key")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool) and types != bool:
        names = types.__name__ if isinstance(types, type) else "/".join(
            t.__name__ for t in types
        )
        raise ConfigError(
            f"{path}.{key}: expected {names}, got {type(value).__name__}"
        )
    return value


def _matrix(obj, path: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(
        isinstance(r, list) for r in obj
    ):
        raise ConfigError(f"{path}: expected a non-empty array of arrays")
    width = len(obj[0])
    for i, row in enumerate(obj):
        if len(row) != width:
            raise ConfigError(f"{path}[{i}]: ragged row, expected {width} entries")
        for j, v in enumerate(row):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"{path}[{i}][{j}]: expected a number")
    return np.asarray(obj, dtype=float)


@dataclass(frozen=True)
class Config:
    """Validated configuration, ready to hand to the library."""

    model: ModelParams
    window: WindowConfig
    policy: Policy
    m: int
    n0: int
    changes: tuple
    replications: int
    horizon_cap: int
    seed: int
    out_dir: str
    input_csv: str | None
    reference_csv: str | None
    calibration: CalibrationSpec | None
    scenario_name: str

    def scenario(self, **overrides) -> Scenario:
        fields = dict(
            name=self.scenario_name,
            model=self.model,
            m=self.m,
            window=self.window,
            policy=self.policy,
            changes=self.changes,
            replications=self.replications,
            horizon_cap=self.horizon_cap,
            n0=self.n0,
            seed=self.seed,
        )
        fields.update(overrides)
        return Scenario(**fields)


def _parse_model(section, path: str) -> tuple[ModelParams, str]:
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object")
    builtin = section.get("builtin")
    if builtin is not None:
        # Built-in models keep their own noise defaults unless overridden.
        kw = {}
        if "sigma_q" in section:
            kw["sigma_q"] = _require(section, "sigma_q", path, (int, float))
        if "sigma_r" in section:
            kw["sigma_r"] = _require(section, "sigma_r", path, (int, float))
        if builtin == "bench-p10":
            return benchmark_p10_model(**kw), builtin
        if builtin == "bench-p30":
            return benchmark_p30_model(**kw), builtin
        raise ConfigError(f"{path}.builtin: unknown built-in model {builtin!r}")
    sigma_q = _require(section, "sigma_q", path, (int, float), 0.1)
    sigma_r = _require(section, "sigma_r", path, (int, float), 0.1)
    a = _matrix(_require(section, "A", path, list), f"{path}.A")
    c = _matrix(_require(section, "C", path, list), f"{path}.C")
    if a.shape[0] != a.shape[1]:
        raise ConfigError(f"{path}.A: must be square, got {a.shape}")
    if c.shape[1] != a.shape[0]:
        raise ConfigError(
            f"{path}.C: has {c.shape[1]} columns but A is {a.shape[0]}x{a.shape[0]}"
        )
    try:
        return ModelParams(A=a, C=c, sigma_q=sigma_q, sigma_r=sigma_r), "custom"
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_alpha(value, path: str):
    if isinstance(value, dict):
        try:
            return AlphaSchedule(
                d=float(_require(value, "d", path, (int, float))),
                l=float(_require(value, "l", path, (int, float))),
                alpha_min=float(_require(value, "alpha_min", path, (int, float))),
                alpha_max=float(_require(value, "alpha_max", path, (int, float))),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"{path}: expected a number or a schedule object")


def _parse_changes(grid, q: int, path: str) -> tuple:
    if not isinstance(grid, list):
        raise ConfigError(f"{path}: expected an array")
    changes = []
    for i, entry in enumerate(grid):
        if isinstance(entry, (int, float)) and not isinstance(entry, bool):
            changes.append(single_dim_shift(q, float(entry)))
        elif isinstance(entry, dict):
            f = entry.get("f")
            if not isinstance(f, list) or len(f) != q:
                raise ConfigError(f"{path}[{i}].f: expected an array of length {q}")
            tau = entry.get("tau", 0)
            if tau is None:
                tau = math.inf
            changes.append(ChangeSpec(tau=tau, f=np.asarray(f, dtype=float)))
        else:
            raise ConfigError(f"{path}[{i}]: expected a number or an object")
    return tuple(changes)


def parse_config(doc: dict, source: str = "<config>") -> Config:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown section")

    model, builtin_name = _parse_model(doc.get("model", {"builtin": "bench-p10"}), "model")

    window_sec = doc.get("window", {})
    if not isinstance(window_sec, dict):
        raise ConfigError("window: expected an object")
    h = window_sec.get("h")
    if h is not None and (not isinstance(h, (int, float)) or isinstance(h, bool)):
        raise ConfigError("window.h: expected a number or null")
    try:
        window = WindowConfig(
            m1=_require(window_sec, "m1", "window", int, 50),
            m2=_require(window_sec, "m2", "window", int, 5),
            h=None if h is None else float(h),
        )
    except ValueError as exc:
        raise ConfigError(f"window: {exc}") from None

    policy_sec = doc.get("policy", {})
    if not isinstance(policy_sec, dict):
        raise ConfigError("policy: expected an object")
    name = _require(policy_sec, "name", "policy", str, "e_aucrss")
    if name not in POLICY_NAMES:
        raise ConfigError(
            f"policy.name: unknown policy {name!r}, expected one of {POLICY_NAMES}"
        )
    alpha = policy_sec.get("alpha")
    alpha = DEFAULT_ALPHA_SCHEDULE if alpha is None else _parse_alpha(alpha, "policy.alpha")
    try:
        policy = Policy(kind=name, alpha=None if name == "random" else alpha)
    except ValueError as exc:
        raise ConfigError(f"policy: {exc}") from None

    sampling = doc.get("sampling", {})
    if not isinstance(sampling, dict):
        raise ConfigError("sampling: expected an object")
    m = _require(sampling, "m", "sampling", int, 2)
    n0 = _require(sampling, "n0", "sampling", int, 50)
    if not 1 <= m <= model.p:
        raise ConfigError(f"sampling.m: must be in [1, p={model.p}], got {m}")
    if n0 < 1:
        raise ConfigError(f"sampling.n0: must be >= 1, got {n0}")

    exp = doc.get("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError("experiment: expected an object")
    replications = _require(exp, "replications", "experiment", int, 1000)
    horizon_cap = _require(exp, "horizon_cap", "experiment", int, 1000)
    seed = _require(exp, "seed", "experiment", int, 0)
    if replications < 1:
        raise ConfigError("experiment.replications: must be >= 1")
    if horizon_cap < 1:
        raise ConfigError("experiment.horizon_cap: must be >= 1")
    if seed < 0:
        raise ConfigError("experiment.seed: must be >= 0")
    changes = _parse_changes(exp.get("grid", [0.0]), model.q, "experiment.grid")

    io = doc.get("io", {})
    if not isinstance(io, dict):
        raise ConfigError("io: expected an object")
    out_dir = _require(io, "out_dir", "io", str, ".")
    input_csv = _require(io, "input_csv", "io", str, None)
    reference_csv = _require(io, "reference_csv", "io", str, None)

    cal = doc.get("calibration")
    cal_spec = None
    if cal is not None:
        if not isinstance(cal, dict):
            raise ConfigError("calibration: expected an object")
        try:
            cal_spec = CalibrationSpec(
                target_add_ic=float(
                    _require(cal, "target_add_ic", "calibration", (int, float))
                ),
                replications=_require(cal, "replications", "calibration", int, 1000),
                h_lo=float(_require(cal, "h_lo", "calibration", (int, float), 1.0)),
                h_hi=float(_require(cal, "h_hi", "calibration", (int, float), 200.0)),
                tol=float(_require(cal, "tol", "calibration", (int, float), 0.05)),
                max_iters=_require(cal, "max_iters", "calibration", int, 40),
                horizon_cap=_require(cal, "horizon_cap", "calibration", int, 1000),
                seed=_require(cal, "seed", "calibration", int, seed),
                workers=_require(cal, "workers", "calibration", int, 1),
            )
        except ValueError as exc:
            raise ConfigError(f"calibration: {exc}") from None

    return Config(
        model=model,
        window=window,
        policy=policy,
        m=m,
        n0=n0,
        changes=changes,
        replications=replications,
        horizon_cap=horizon_cap,
        seed=seed,
        out_dir=out_dir,
        input_csv=input_csv,
        reference_csv=reference_csv,
        calibration=cal_spec,
        scenario_name=builtin_name,
    )


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(doc, source=str(path))
