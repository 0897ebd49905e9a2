"""JSON experiment configuration.

Top-level keys::

    experiment     "hexagon" | "toll" | "custom"
    instance       experiment-specific parameters (see below)
    schedule       schedule fields for make_schedule, or the string "certified"
    constants      optional: {"declared": {l_g1, l_f0, l_f1, l_g0}, "kappa": ...,
                   "l_psi2", "l_f2_eta", "l_star1", "c_xi"}
    K              number of outer iterations
    x0             starting outer point (custom only)
    x_box          optional [lower, upper] projection box for x
    seeds          list of integer seeds
    noise          optional {"radius_x", "radius_y"}: noisy upper gradients
    output_dir     directory for artifacts (overridden by --out)
    diagnostics    {"tube", "bias", "stationarity", "proxy_bias"} booleans
    budget_ms      optional wall-clock budget per run
    bench          toll benchmark grid: {"n_list", "reference_iterations_factor"}

``instance`` for hexagon: any HexagonConfig field. For toll: ``n``, ``tau``
and ``mu``. For custom: ``polytope`` (inline document or a path relative to
the config file), ``Q_f``, ``c_f``, ``Q_g``, ``c_g`` (``{"M", "c0"}``),
optional ``x_weight`` and ``mu``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import polytope as poly
from .bmfo import LocalConstants, Schedule, default_local_constants
from .errors import BarrierBilevelError, InvalidConfig
from .polytope import Polytope
from .problem import AffineMap, quadratic_instance

EXPERIMENTS = ("hexagon", "toll", "custom")
DIAGNOSTIC_FLAGS = ("tube", "bias", "stationarity", "proxy_bias")
_TOP_KEYS = {"experiment", "instance", "schedule", "constants", "K", "x0", "x_box", "seeds",
             "noise", "output_dir", "diagnostics", "budget_ms", "bench", "description"}


@dataclass
class ExperimentConfig:
    experiment: str
    instance: dict
    schedule: object
    K: int
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "out"
    diagnostics: dict = field(default_factory=dict)
    constants: Optional[dict] = None
    x0: Optional[list] = None
    x_box: Optional[list] = None
    noise: Optional[dict] = None
    budget_ms: Optional[float] = None
    bench: dict = field(default_factory=dict)
    base_dir: str = "."

    def wants(self, flag: str) -> bool:
        return bool(self.diagnostics.get(flag, False))


def load_config(path: str) -> ExperimentConfig:
    if not os.path.isfile(path):
        raise InvalidConfig(f"config file not found: {path}")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}") from None
    cfg = config_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))
    validate_config(cfg)
    return cfg


def config_from_dict(doc: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise InvalidConfig("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    for key in ("experiment", "K"):
        if key not in doc:
            raise InvalidConfig(f"config is missing {key!r}")
    if doc["experiment"] not in EXPERIMENTS:
        raise InvalidConfig(f"experiment must be one of {EXPERIMENTS}")
    K = doc["K"]
    if not isinstance(K, int) or K < 0:
        raise InvalidConfig("K must be a nonnegative integer")
    diags = dict(doc.get("diagnostics", {}))
    bad = set(diags) - set(DIAGNOSTIC_FLAGS)
    if bad:
        raise InvalidConfig(f"unknown diagnostics flags: {sorted(bad)}")
    seeds = doc.get("seeds", [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds) or not seeds:
        raise InvalidConfig("seeds must be a nonempty list of integers")
    return ExperimentConfig(
        experiment=doc["experiment"], instance=dict(doc.get("instance", {})),
        schedule=doc.get("schedule", "certified"), K=K, seeds=seeds,
        output_dir=doc.get("output_dir", "out"), diagnostics=diags,
        constants=doc.get("constants"), x0=doc.get("x0"), x_box=doc.get("x_box"),
        noise=doc.get("noise"), budget_ms=doc.get("budget_ms"), bench=dict(doc.get("bench", {})),
        base_dir=base_dir,
    )


def validate_config(cfg: ExperimentConfig) -> None:
    """Build everything that can be built without running a solver."""
    try:
        if cfg.experiment == "custom":
            mu = build_custom(cfg)[1]
        elif cfg.experiment == "hexagon":
            mu = hexagon_config(cfg).mu
        else:
            mu = toll_params(cfg)[2]
        if isinstance(cfg.schedule, dict):
            schedule_from_config(cfg, mu)
        elif cfg.schedule != "certified":
            raise InvalidConfig('schedule must be an object or "certified"')
        if cfg.x_box is not None and (len(cfg.x_box) != 2 or not cfg.x_box[0] < cfg.x_box[1]):
            raise InvalidConfig("x_box must be [lower, upper] with lower < upper")
        if cfg.budget_ms is not None and cfg.budget_ms < 0:
            raise InvalidConfig("budget_ms must be nonnegative")
    except InvalidConfig:
        raise
    except (BarrierBilevelError, KeyError, TypeError, ValueError) as exc:
        raise InvalidConfig(f"invalid config: {exc}") from None


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def hexagon_config(cfg: ExperimentConfig):
    from .benchmarks.hexagon import HexagonConfig
    return HexagonConfig.from_dict(cfg.instance)


def toll_params(cfg: ExperimentConfig):
    """``(n, tau, mu)`` for a toll experiment."""
    inst = cfg.instance
    n = inst.get("n", 50)
    tau = inst.get("tau", 0.2)
    mu = inst.get("mu", 1e-3)
    if not isinstance(n, int) or n < 10:
        raise InvalidConfig("toll n must be an integer >= 10")
    if not 0 < tau <= 1 or not mu > 0:
        raise InvalidConfig("toll needs 0 < tau <= 1 and mu > 0")
    return n, float(tau), float(mu)


def _load_polytope(source, base_dir: str) -> Polytope:
    if isinstance(source, str):
        path = source if os.path.isabs(source) else os.path.join(base_dir, source)
        if not os.path.isfile(path):
            raise InvalidConfig(f"polytope file not found: {source}")
        with open(path) as fh:
            return Polytope.from_json(fh.read())
    if isinstance(source, dict):
        return Polytope.from_dict(source)
    raise InvalidConfig("instance.polytope must be an object or a file path")


def build_custom(cfg: ExperimentConfig):
    """Quadratic instance and barrier parameter from a custom config."""
    d = cfg.instance
    for key in ("polytope", "Q_f", "c_f", "Q_g", "c_g"):
        if key not in d:
            raise InvalidConfig(f"custom instance is missing {key!r}")
    P = _load_polytope(d["polytope"], cfg.base_dir)
    M = np.atleast_2d(np.asarray(d["c_g"]["M"], dtype=float))
    c0 = np.asarray(d["c_g"]["c0"], dtype=float)
    inst = quadratic_instance(d["Q_f"], d["c_f"], d["Q_g"], AffineMap(M, c0), P,
                              x_weight=float(d.get("x_weight", 0.0)), name="custom")
    if cfg.x0 is None or len(cfg.x0) != inst.dim_x:
        raise InvalidConfig(f"custom experiments need x0 of length {inst.dim_x}")
    mu = float(d.get("mu", 1e-3))
    if not mu > 0:
        raise InvalidConfig("mu must be positive")
    return inst, mu


def schedule_from_config(cfg: ExperimentConfig, mu: Optional[float] = None) -> Schedule:
    doc = dict(cfg.schedule)
    if mu is not None:
        doc.setdefault("mu", mu)
    keys = ("alpha0", "gamma0", "lambda0", "k0", "xi", "T", "eta", "mu")
    missing = [k for k in keys if k not in doc and not (k == "k0" and doc.get("kind") == "explicit")]
    if missing:
        raise InvalidConfig(f"schedule is missing {missing}")
    doc.setdefault("k0", 1.0)
    return Schedule.from_dict(doc)


def custom_constants(cfg: ExperimentConfig, inst, mu: float, eta: float) -> LocalConstants:
    """Constants from ``cfg.constants`` falling back to the instance's declared bounds."""
    c = dict(cfg.constants or {})
    declared = dict(c.get("declared", {}))
    for key in ("l_g1", "l_f0", "l_f1", "l_g0"):
        if key not in declared:
            val = getattr(inst, key)
            if val is None:
                raise InvalidConfig(f"constants.declared needs {key} (not known for this instance)")
            declared[key] = val
    kappa = c.get("kappa")
    if kappa is None:
        kappa = poly.euclidean_dikin_kappa(inst.polytope)
    return default_local_constants(mu, eta, declared, float(kappa), c.get("l_psi2"),
                                   c.get("l_f2_eta"), c.get("l_star1"), c.get("c_xi"))


def parse_seeds(text: str):
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise InvalidConfig(f"--seeds must be a comma-separated list of integers, got {text!r}") from None
    if not seeds:
        raise InvalidConfig("--seeds is empty")
    return seeds
