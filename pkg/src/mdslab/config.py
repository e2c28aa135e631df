"""JSON experiment configuration (schema version 1).

Unknown keys are errors.  Validation messages carry the line of the
offending key in the source document when it can be located.
"""
import json
import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, MdsLabError
from .generators import Bolthausen, GaussianSurrogate, IidGaussian, MarkovChainSpec, MarkovInduced

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version",
    "generator",
    "n_grid",
    "replications",
    "family",
    "qmc_budget",
    "master_seed",
    "bounds",
    "measure_at",
    "output",
    "max_minutes",
    "check",
}
_FAMILY_KEYS = {"grid_points", "random_count"}
_BOUND_KEYS = {"c_t1", "c_t2", "c_t3", "c_t4", "c_kappa", "q", "p", "kappa_mode"}
_CHECK_KEYS = {
    "t_range",
    "eps_range",
    "grid",
    "rhs_scale",
    "quad_points",
    "mvn_cross_rects",
    "mvn_cross_dim",
    "mvn_cross_draws",
}
_GEN_KEYS = {
    "iid_gaussian": {"kind", "sigma", "d"},
    "bolthausen": {"kind", "d"},
    "markov": {"kind", "P", "nu", "f_table", "g_table", "normalize_diag"},
    "gaussian_surrogate": {"kind", "cond_covs"},
}


@dataclass
class BoundSettings:
    c_t1: float = 1.0
    c_t2: float = 1.0
    c_t3: float = 1.0
    c_t4: float = 1.0
    c_kappa: float = 1.0
    q: float | None = None
    p: float = math.inf
    kappa_mode: str = "proof"


@dataclass
class CheckSettings:
    t_range: tuple = (0.01, 3.0)
    eps_range: tuple = (0.1, 10.0)
    grid: tuple = (5, 5, 4)
    rhs_scale: float = 1.0
    quad_points: int = 2000
    mvn_cross_rects: int = 100
    mvn_cross_dim: int = 10
    mvn_cross_draws: int = 100_000


@dataclass
class ExperimentConfig:
    generator: object = None
    n_grid: list = field(default_factory=list)
    replications: int = 10_000
    grid_points: int = 41
    random_count: int = 512
    qmc_budget: int = 4096
    master_seed: int = 0
    bounds: BoundSettings = field(default_factory=BoundSettings)
    measure_at: str = "terminal"
    output: str | None = None
    max_minutes: float = 30.0
    check: CheckSettings = field(default_factory=CheckSettings)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def d(self):
        return self.generator.d

    def echo(self):
        out = dict(self.raw)
        out["master_seed"] = self.master_seed
        return out


def _line_of(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Validator:
    def __init__(self, text):
        self.text = text

    def fail(self, key, msg):
        raise ConfigError(msg, _line_of(self.text, key))

    def keys(self, obj, allowed, where):
        if not isinstance(obj, dict):
            raise ConfigError(f"{where} must be a JSON object", None)
        for k in obj:
            if k not in allowed:
                self.fail(k, f"unknown key {k!r} in {where}")

    def integer(self, obj, key, lo=None):
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(key, f"{key} must be an integer")
        if lo is not None and v < lo:
            self.fail(key, f"{key} must be >= {lo}")
        return v

    def number(self, obj, key, positive=False):
        v = obj[key]
        if v == "inf":
            return math.inf
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(key, f"{key} must be a number")
        if positive and not v > 0:
            self.fail(key, f"{key} must be positive")
        return float(v)


def _build_generator(g, v):
    v.keys(g, set().union(*_GEN_KEYS.values()), "generator")
    kind = g.get("kind")
    if kind not in _GEN_KEYS:
        v.fail("kind", f"generator kind must be one of {sorted(_GEN_KEYS)}, got {kind!r}")
    v.keys(g, _GEN_KEYS[kind], f"generator[{kind}]")
    try:
        if kind == "iid_gaussian":
            if "sigma" in g:
                return IidGaussian(np.array(g["sigma"], dtype=float))
            if "d" in g:
                return IidGaussian(np.eye(v.integer(g, "d", 1)))
            v.fail("kind", "iid_gaussian needs 'sigma' or 'd'")
        if kind == "bolthausen":
            return Bolthausen(v.integer(g, "d", 1) if "d" in g else 1)
        if kind == "gaussian_surrogate":
            return GaussianSurrogate(np.array(g["cond_covs"], dtype=float))
        P = np.array(g["P"], dtype=float)
        if "f_table" in g and "g_table" in g:
            v.fail("g_table", "give either f_table or g_table, not both")
        if "f_table" in g:
            table = np.array(g["f_table"], dtype=float)
        elif "g_table" in g:
            from .generators import markov_center

            table = markov_center(np.array(g["g_table"], dtype=float), P)
        else:
            v.fail("kind", "markov generator needs f_table or g_table")
        nu = np.array(g["nu"], dtype=float) if "nu" in g else np.full(P.shape[0], 1.0 / P.shape[0])
        chain = MarkovChainSpec(P, nu, table)
        if g.get("normalize_diag", False):
            from .generators import markov_sigma

            scale = 1.0 / np.sqrt(np.diag(markov_sigma(chain)))
            chain = MarkovChainSpec(P, nu, chain.f_table * scale)
        return MarkovInduced(chain)
    except KeyError as exc:
        v.fail("kind", f"generator[{kind}] is missing {exc.args[0]!r}")
    except ConfigError:
        raise
    except (MdsLabError, ValueError) as exc:
        raise ConfigError(f"invalid generator: {exc}", _line_of(v.text, "generator")) from exc


def parse_config(obj, text=None):
    v = _Validator(text)
    v.keys(obj, _TOP_KEYS, "config")
    ver = obj.get("schema_version")
    if ver != SCHEMA_VERSION:
        v.fail("schema_version", f"schema_version must be {SCHEMA_VERSION}, got {ver!r}")
    cfg = ExperimentConfig(raw=json.loads(json.dumps(obj)))
    if "generator" not in obj:
        raise ConfigError("config needs a 'generator' section")
    cfg.generator = _build_generator(obj["generator"], v)
    if "n_grid" in obj:
        grid = obj["n_grid"]
        if not isinstance(grid, list) or not grid or not all(isinstance(x, int) and not isinstance(x, bool) and x >= 1 for x in grid):
            v.fail("n_grid", "n_grid must be a nonempty list of positive integers")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            v.fail("n_grid", "n_grid must be strictly increasing")
        if isinstance(cfg.generator, Bolthausen) and grid[0] < 1024:
            v.fail("n_grid", "the bolthausen generator needs every n >= 1024")
        cfg.n_grid = list(grid)
    if "replications" in obj:
        cfg.replications = v.integer(obj, "replications", 100)
    if "family" in obj:
        fam = obj["family"]
        v.keys(fam, _FAMILY_KEYS, "family")
        if "grid_points" in fam:
            cfg.grid_points = v.integer(fam, "grid_points", 3)
        if "random_count" in fam:
            cfg.random_count = v.integer(fam, "random_count", 0)
    if "qmc_budget" in obj:
        cfg.qmc_budget = v.integer(obj, "qmc_budget", 1024)
    if "master_seed" in obj:
        cfg.master_seed = v.integer(obj, "master_seed", 0)
    if "bounds" in obj:
        b = obj["bounds"]
        v.keys(b, _BOUND_KEYS, "bounds")
        bs = BoundSettings()
        for key in ("c_t1", "c_t2", "c_t3", "c_t4", "c_kappa"):
            if key in b:
                setattr(bs, key, v.number(b, key, positive=True))
        if b.get("q") is not None:
            bs.q = v.number(b, "q", positive=True)
        if b.get("p") is not None:
            bs.p = v.number(b, "p")
            if not bs.p > 1:
                v.fail("p", "p must exceed 1")
        if "kappa_mode" in b:
            if b["kappa_mode"] not in ("proof", "statement"):
                v.fail("kappa_mode", "kappa_mode must be 'proof' or 'statement'")
            bs.kappa_mode = b["kappa_mode"]
        cfg.bounds = bs
    if "measure_at" in obj:
        if obj["measure_at"] not in ("terminal", "window_end"):
            v.fail("measure_at", "measure_at must be 'terminal' or 'window_end'")
        if obj["measure_at"] == "window_end" and not isinstance(cfg.generator, Bolthausen):
            v.fail("measure_at", "measure_at='window_end' only applies to the bolthausen generator")
        cfg.measure_at = obj["measure_at"]
    if "output" in obj:
        if not isinstance(obj["output"], str):
            v.fail("output", "output must be a string path")
        cfg.output = obj["output"]
    if "max_minutes" in obj:
        cfg.max_minutes = v.number(obj, "max_minutes", positive=True)
    if "check" in obj:
        c = obj["check"]
        v.keys(c, _CHECK_KEYS, "check")
        cs = CheckSettings()
        for key in ("t_range", "eps_range"):
            if key in c:
                r = c[key]
                if not (isinstance(r, list) and len(r) == 2 and 0 < r[0] < r[1]):
                    v.fail(key, f"{key} must be [lo, hi] with 0 < lo < hi")
                setattr(cs, key, tuple(float(x) for x in r))
        if "grid" in c:
            g = c["grid"]
            if not (isinstance(g, list) and len(g) == 3 and all(isinstance(x, int) and x >= 1 for x in g)):
                v.fail("grid", "check.grid must be three positive integers")
            cs.grid = tuple(g)
        if "rhs_scale" in c:
            cs.rhs_scale = v.number(c, "rhs_scale", positive=True)
        for key in ("quad_points", "mvn_cross_rects", "mvn_cross_dim", "mvn_cross_draws"):
            if key in c:
                setattr(cs, key, v.integer(c, key, 1))
        if cs.quad_points < 1000:
            v.fail("quad_points", "quad_points must be >= 1000")
        cfg.check = cs
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    return parse_config(obj, text)


def settings_dict(cfg):
    return {"bounds": asdict(cfg.bounds), "check": asdict(cfg.check)}
