"""Experiment drivers behind the command-line interface.

Replications run in fixed-size blocks.  Block ``b`` at horizon ``n`` draws
from ``SeedSequence(master_seed, spawn_key=(n, b))`` and blocks are
concatenated in index order, so results are identical for any worker count.
"""
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import __version__
from .bounds import (
    MomentStats,
    bound_t1,
    bound_t2,
    bound_t3,
    bound_t4,
    kappa_markov,
    kappa_statement,
    log_plus,
    rate_fit,
    stein_integral_check,
)
from .errors import ConfigError, InvalidInput, MdsLabError
from .gaussian import Rectangle, empirical_rect_probs, rect_prob, sample_mvn
from .generators import (
    Bolthausen,
    MarkovInduced,
    MdsPath,
    bolthausen_window,
    markov_sigma,
    simulate_markov,
    simulate_sums,
    stationary_and_gap,
    step_moments,
    yurinskii_augment,
)
from .kolmogorov import build_family, estimate_dk, reference_probs
from .spectral import as_symmetric, spectral_stats

BLOCK = 8192
MARKOV_BLOCK = 128
THREADS_ENV = "MDSLAB_THREADS"
PILOT_SIZES = (10, 40)

CSV_HEADER = (
    "n",
    "d",
    "R",
    "dk_value",
    "mc_error",
    "mvn_error",
    "bound_t1",
    "bound_t2",
    "bound_t3a",
    "bound_t3b",
    "bound_t4",
    "seed",
)
MARKOV_HEADER = (
    "n",
    "d",
    "R",
    "kappa",
    "kappa_statement",
    "dev_p90",
    "kappa_exceed",
    "tau_mean",
    "tau_min",
    "qv_resid_max",
    "dk_raw",
    "dk_aug",
    "bound_t4",
    "seed",
)


@dataclass
class ExperimentReport:
    command: str
    header: tuple
    rows: list
    fits: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    software_version: str = __version__

    def csv_text(self):
        lines = [",".join(self.header)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[k]) for k in self.header))
        return "\n".join(lines) + "\n"

    def to_json(self):
        return _jsonable(
            {
                "command": self.command,
                "software_version": self.software_version,
                "config": self.config,
                "rows": self.rows,
                "fits": self.fits,
                **self.extra,
            }
        )


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


# --------------------------------------------------------------------------
# replication plumbing


def resolve_threads(threads=None):
    if threads is not None:
        if threads < 1:
            raise ConfigError("--threads must be >= 1")
        return threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            val = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if val < 1:
            raise ConfigError(f"{THREADS_ENV} must be >= 1")
        return val
    return os.cpu_count() or 1


def block_rng(master_seed, n, block):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(n, block)))


def run_blocks(work, n, R, master_seed, threads, block=BLOCK):
    """Apply ``work(rng, size)`` to every replication block, in block order."""
    sizes = [min(block, R - b * block) for b in range(-(-R // block))]

    def job(b):
        return work(block_rng(master_seed, n, b), sizes[b])

    if threads == 1 or len(sizes) == 1:
        return [job(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(len(sizes))))


def project_seconds(work, n, R, master_seed, block=BLOCK):
    """Projected wall time of ``R`` replications from two small pilots.

    Cost is modelled as ``a * blocks + b * R`` and fitted from pilots of 10 and
    40 replications on a seed stream disjoint from the real run.
    """
    times = []
    for i, size in enumerate(PILOT_SIZES):
        rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(n, 2**32 - 1 - i)))
        t0 = time.perf_counter()
        work(rng, size)
        times.append(time.perf_counter() - t0)
    per_rep = max(0.0, (times[1] - times[0]) / (PILOT_SIZES[1] - PILOT_SIZES[0]))
    fixed = max(0.0, times[0] - PILOT_SIZES[0] * per_rep)
    return fixed * -(-R // block) + per_rep * R


def guard_budget(cells, max_minutes):
    """Refuse a run whose projected total exceeds ``max_minutes``."""
    total = 0.0
    for work, n, R, seed, block in cells:
        total += project_seconds(work, n, R, seed, block)
    if total > 60.0 * max_minutes:
        raise ConfigError(
            f"projected run time {total / 60:.1f} min exceeds the {max_minutes:g} min ceiling; "
            "lower replications or n_grid, or raise max_minutes"
        )
    return total


class _ReferenceCache:
    """Rectangle family and Gaussian reference probabilities per covariance."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._store = {}

    def get(self, sigma):
        sigma = as_symmetric(sigma)
        key = sigma.tobytes()
        if key not in self._store:
            c = self.cfg
            fam = build_family(sigma.shape[0], sigma, c.grid_points, c.random_count, seed=c.master_seed)
            ref = reference_probs(sigma, fam, budget=c.qmc_budget, seed=c.master_seed)
            self._store[key] = (fam, ref)
        return self._store[key]

    def dk(self, samples, sigma):
        fam, ref = self.get(sigma)
        return estimate_dk(samples, sigma, fam, budget=self.cfg.qmc_budget, seed=self.cfg.master_seed, reference=ref)


# --------------------------------------------------------------------------
# bounds


def moment_stats(mom, n, d):
    sp = spectral_stats(mom.sigma_n)
    third = np.asarray(mom.third_by_step)
    return MomentStats(
        M=mom.ratio_max,
        alpha=mom.alpha,
        beta=mom.beta,
        gamma=float(third.max()) ** (2.0 / 3.0) / log_plus(d),
        lambda_min_sigma=sp.lambda_min,
        d_min_sigma=sp.d_min,
        d_max_sigma=sp.d_max,
        third_moment_mean=float(third.mean()),
        n=n,
        d=d,
    )


def rn_norm(nu, mu, p=math.inf):
    """``||d nu / d mu||_{L^p(mu)}``; infinite when nu charges a mu-null state."""
    if np.any((mu <= 0) & (nu > 0)):
        return math.inf
    pos = mu > 0
    ratio = nu[pos] / mu[pos]
    if math.isinf(p):
        val = float(ratio.max())
    else:
        val = float(np.sum(mu[pos] * ratio**p) ** (1.0 / p))
    return max(1.0, val)


def markov_kappa(chain, n, settings, alpha, beta):
    """Both radii: the concentration formula and the ``log(nd)/sqrt(n)`` scale."""
    mu, gap = stationary_and_gap(chain.P)
    rn = rn_norm(chain.nu, mu, settings.p)
    stmt = kappa_statement(n, chain.d, settings.c_kappa)
    if math.isinf(rn):
        proof = math.inf
    else:
        proof = kappa_markov(beta, alpha, gap, n, chain.d, rn, settings.q, settings.p, settings.c_kappa)
    chosen = proof if settings.kappa_mode == "proof" else stmt
    return chosen, proof, stmt


def evaluate_bounds(spec, n, mom, settings):
    """Bound columns for one horizon; NaN where a theorem does not apply."""
    out = dict.fromkeys(("bound_t1", "bound_t2", "bound_t3a", "bound_t3b", "bound_t4"), math.nan)
    try:
        s = moment_stats(mom, n, spec.d)
    except InvalidInput:
        return out
    if isinstance(spec, MarkovInduced):
        kappa, _, _ = markov_kappa(spec.chain, n, settings, mom.alpha, mom.beta)
        if 0 < kappa < 1:
            inv = float(np.linalg.norm(np.linalg.inv(mom.sigma_n), 2))
            out["bound_t4"] = bound_t4(s, kappa, inv, settings.c_t4).value
        return out
    out["bound_t1"] = bound_t1(s, settings.c_t1).value
    out["bound_t2"] = bound_t2(s, settings.c_t2).value
    out["bound_t3a"] = bound_t3(s, "without_alpha", settings.c_t3).value
    out["bound_t3b"] = bound_t3(s, "with_alpha", settings.c_t3).value
    return out


def fit_series(rows, key):
    pts = [(r["n"], r[key]) for r in rows]
    if len(pts) < 2 or not all(math.isfinite(v) and v > 0 for _, v in pts):
        return None
    f = rate_fit(pts)
    return {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}


# --------------------------------------------------------------------------
# commands


def _horizon(cfg, n):
    if cfg.measure_at == "window_end":
        return bolthausen_window(n)[1]
    return None


def _sum_work(spec, n, horizon):
    def work(rng, size):
        return simulate_sums(spec, n, size, rng, horizon=horizon)

    return work


def cmd_ratefit(cfg, threads=1, with_bounds=True, guard=True, command="ratefit"):
    """Simulate ``S_n / sqrt(n)`` over the grid, estimate d_K, evaluate bounds, fit rates."""
    spec = cfg.generator
    if not cfg.n_grid:
        raise ConfigError("n_grid is required for this command")
    if guard:
        guard_budget(
            [(_sum_work(spec, n, _horizon(cfg, n)), n, cfg.replications, cfg.master_seed, BLOCK) for n in cfg.n_grid],
            cfg.max_minutes,
        )
    cache = _ReferenceCache(cfg)
    rows = []
    for n in cfg.n_grid:
        t0 = time.perf_counter()
        batches = run_blocks(_sum_work(spec, n, _horizon(cfg, n)), n, cfg.replications, cfg.master_seed, threads)
        sums = np.concatenate([b.sums for b in batches])
        third_total = None
        if batches[0].third_total is not None:
            third_total = np.sum([b.third_total for b in batches], axis=0)
        mom = step_moments(spec, n, third_total, cfg.replications)
        est = cache.dk(sums, mom.sigma_n)
        row = {
            "n": n,
            "d": spec.d,
            "R": cfg.replications,
            "dk_value": est.value,
            "mc_error": est.mc_error,
            "mvn_error": est.mvn_error,
        }
        if with_bounds:
            row.update(evaluate_bounds(spec, n, mom, cfg.bounds))
        else:
            row.update(dict.fromkeys(CSV_HEADER[6:11], math.nan))
        row["seed"] = cfg.master_seed
        row["mc_error_bonferroni"] = est.mc_error_bonferroni
        row["family_size"] = est.family_size
        row["wall_time"] = time.perf_counter() - t0
        rows.append(row)
    fits = {k: fit_series(rows, k) for k in ("dk_value",) + (CSV_HEADER[6:11] if with_bounds else ())}
    extra = {"measure_at": cfg.measure_at}
    if isinstance(spec, Bolthausen) and spec.d > 1:
        extra["marginal_ks"] = _marginal_ks(cfg, threads)
    return ExperimentReport(command, CSV_HEADER, rows, fits, cfg.echo(), extra)


def cmd_distance(cfg, threads=1, guard=True):
    """d_K estimates over the grid without bound evaluation."""
    return cmd_ratefit(cfg, threads, with_bounds=False, guard=guard, command="distance")


def _marginal_ks(cfg, threads):
    # coordinates >= 2 of the lower-bound array should be exactly standard normal
    from scipy.stats import kstest

    n = cfg.n_grid[-1]
    batches = run_blocks(_sum_work(cfg.generator, n, _horizon(cfg, n)), n, cfg.replications, cfg.master_seed, threads)
    sums = np.concatenate([b.sums for b in batches])
    return {int(j): float(kstest(sums[:, j], "norm").statistic) for j in range(1, sums.shape[1])}


def cmd_simulate(cfg, threads=1, guard=True):
    """Draw the replications and return them with summary moments."""
    spec = cfg.generator
    if not cfg.n_grid:
        raise ConfigError("n_grid is required for this command")
    if guard:
        guard_budget(
            [(_sum_work(spec, n, _horizon(cfg, n)), n, cfg.replications, cfg.master_seed, BLOCK) for n in cfg.n_grid],
            cfg.max_minutes,
        )
    rows, arrays = [], {}
    for n in cfg.n_grid:
        t0 = time.perf_counter()
        batches = run_blocks(_sum_work(spec, n, _horizon(cfg, n)), n, cfg.replications, cfg.master_seed, threads)
        sums = np.concatenate([b.sums for b in batches])
        arrays[f"n{n}"] = sums
        cov = np.atleast_2d(np.cov(sums, rowvar=False))
        rows.append(
            {
                "n": n,
                "d": spec.d,
                "R": cfg.replications,
                "mean_max_abs": float(np.max(np.abs(sums.mean(axis=0)))),
                "cov_trace": float(np.trace(cov)),
                "cov_min_eig": float(np.linalg.eigvalsh(cov)[0]),
                "seed": cfg.master_seed,
                "wall_time": time.perf_counter() - t0,
            }
        )
    header = ("n", "d", "R", "mean_max_abs", "cov_trace", "cov_min_eig", "seed")
    return ExperimentReport("simulate", header, rows, {}, cfg.echo()), arrays


def _markov_work(chain, n, sigma, kappa):
    covs_table = chain.state_covs()
    f = chain.f_table
    cap = n * (sigma + kappa * np.eye(chain.d))

    def work(rng, size):
        sums, occ, states = simulate_markov(chain, n, size, rng, keep_states=True)
        aug = np.empty_like(sums)
        taus = np.empty(size, dtype=np.int64)
        resid = np.empty(size)
        path_seeds = rng.integers(0, 2**63, size=size)
        for r in range(size):
            st = states[:, r]
            path = MdsPath(f[st[:-1], st[1:]], covs_table[st[:-1]], "markov")
            new, tau = yurinskii_augment(path, sigma, kappa, int(path_seeds[r]))
            aug[r] = new.increments.sum(axis=0)
            taus[r] = tau
            resid[r] = float(np.max(np.abs(new.terminal_qv() - cap)))
        return sums, occ, aug, taus, resid

    return work


def cmd_markov(cfg, threads=1, guard=True):
    """Concentration of the averaged conditional covariance, stopping-time
    augmentation and distances for a Markov-induced martingale."""
    spec = cfg.generator
    if not isinstance(spec, MarkovInduced):
        raise ConfigError("the markov command needs a generator of kind 'markov'")
    if not cfg.n_grid:
        raise ConfigError("n_grid is required for this command")
    chain = spec.chain
    sigma = markov_sigma(chain)
    covs_table = chain.state_covs()
    mom0 = step_moments(spec, cfg.n_grid[0])
    kappas = {n: markov_kappa(chain, n, cfg.bounds, mom0.alpha, mom0.beta) for n in cfg.n_grid}
    for n, (k, _, _) in kappas.items():
        if not math.isfinite(k):
            raise ConfigError(f"kappa is not finite at n={n} (initial law charges a null state?)")
    if guard:
        guard_budget(
            [
                (_markov_work(chain, n, sigma, kappas[n][0]), n, cfg.replications, cfg.master_seed, MARKOV_BLOCK)
                for n in cfg.n_grid
            ],
            cfg.max_minutes,
        )
    cache = _ReferenceCache(cfg)
    scale = max(1.0, float(np.max(np.abs(sigma))))
    rows = []
    for n in cfg.n_grid:
        t0 = time.perf_counter()
        kappa, kappa_proof, kappa_stmt = kappas[n]
        out = run_blocks(
            _markov_work(chain, n, sigma, kappa), n, cfg.replications, cfg.master_seed, threads, MARKOV_BLOCK
        )
        sums, occ, aug, taus, resid = (np.concatenate([o[i] for o in out]) for i in range(5))
        sigma_bar = np.einsum("rs,sij->rij", occ / n, covs_table)
        dev = np.linalg.norm(sigma_bar - sigma, ord=2, axis=(1, 2))
        root_n = math.sqrt(n)
        dk_raw = cache.dk(sums / root_n, sigma)
        dk_aug = cache.dk(aug / root_n, sigma + kappa * np.eye(spec.d))
        mom = step_moments(spec, n)
        t4 = evaluate_bounds(spec, n, mom, cfg.bounds)["bound_t4"]
        rows.append(
            {
                "n": n,
                "d": spec.d,
                "R": cfg.replications,
                "kappa": kappa,
                "kappa_statement": kappa_stmt,
                "dev_p90": float(np.quantile(dev, 0.9)),
                "kappa_exceed": float(np.mean(dev > kappa + 1e-12 * scale)),
                "tau_mean": float(taus.mean()),
                "tau_min": int(taus.min()),
                "qv_resid_max": float(resid.max()),
                "dk_raw": dk_raw.value,
                "dk_aug": dk_aug.value,
                "bound_t4": t4,
                "seed": cfg.master_seed,
                "kappa_proof": kappa_proof,
                "dev_mean": float(dev.mean()),
                "tau_full_fraction": float(np.mean(taus == n)),
                "dk_raw_mc_error": dk_raw.mc_error,
                "dk_aug_mc_error": dk_aug.mc_error,
                "wall_time": time.perf_counter() - t0,
            }
        )
    fits = {k: fit_series(rows, k) for k in ("dev_p90", "dk_raw", "dk_aug", "bound_t4")}
    extra = {"sigma": sigma, "kappa_mode": cfg.bounds.kappa_mode}
    return ExperimentReport("markov", MARKOV_HEADER, rows, fits, cfg.echo(), extra)


# --------------------------------------------------------------------------
# self-checks


STEIN_WORKED_CASE = (0.5, 1.0, 1.0)


def stein_grid(check):
    t = np.geomspace(*check.t_range, check.grid[0])
    e1 = np.geomspace(*check.eps_range, check.grid[1])
    ek = np.geomspace(*check.eps_range, check.grid[2])
    return [(float(a), float(b), float(c)) for a in t for b in e1 for c in ek]


def _random_box(rng, d):
    k = int(rng.integers(1, d + 1))
    coords = rng.choice(d, size=k, replace=False)
    width = rng.uniform(0.2, 0.9) ** (1.0 / k)
    centre = rng.uniform(width / 2, 1 - width / 2, size=k)
    lo = np.full(d, -np.inf)
    hi = np.full(d, np.inf)
    lo[coords] = ndtri(centre - width / 2)
    hi[coords] = ndtri(centre + width / 2)
    return Rectangle(lo, hi)


def gaussian_cross_checks(check, seed=0, budget=4096):
    """Analytic and empirical cross-checks of the rectangle-probability engine."""
    cases = []
    orth = rect_prob(np.array([[1.0, 0.5], [0.5, 1.0]]), Rectangle([-np.inf] * 2, [0.0, 0.0]), budget, seed)
    cases.append(("orthant rho=0.5", orth.value, 1.0 / 3.0, 1e-3))
    box = rect_prob(np.eye(3), Rectangle([-1.0] * 3, [1.0] * 3), budget, seed)
    cases.append(("product [-1,1]^3", box.value, (2 * 0.8413447460685429 - 1) ** 3, 1e-3))
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    d = check.mvn_cross_dim
    a = rng.standard_normal((d, d))
    cov = a @ a.T / d + 0.5 * np.eye(d)
    sd = np.sqrt(np.diag(cov))
    cov = cov / np.outer(sd, sd)
    rects = [_random_box(rng, d) for _ in range(check.mvn_cross_rects)]
    draws = sample_mvn(np.linalg.cholesky(cov), check.mvn_cross_draws, rng)
    emp = empirical_rect_probs(draws, rects)
    for i, r in enumerate(rects):
        p = rect_prob(cov, r, budget, seed=(seed, i)).value
        cases.append((f"random box {i} (d={d})", p, float(emp[i]), 0.01))
    return [
        {"case": name, "value": v, "reference": ref, "tolerance": tol, "holds": bool(abs(v - ref) <= tol)}
        for name, v, ref, tol in cases
    ]


def cmd_check(check, seed=0):
    """Run the integral-inequality sweep and the Gaussian engine cross-checks.

    Returns ``(ok, report_dict, first_failure_message_or_None)``.
    """
    triples = [STEIN_WORKED_CASE] + stein_grid(check)
    stein = []
    first = None
    for t, e1, ek in triples:
        try:
            res = stein_integral_check(t, e1, ek, check.quad_points, check.rhs_scale)
            entry = {"t": t, "eps1": e1, "epsk": ek, "lhs": res.lhs, "rhs": res.rhs, "holds": res.holds}
        except MdsLabError as exc:
            entry = {"t": t, "eps1": e1, "epsk": ek, "lhs": None, "rhs": None, "holds": False, "error": str(exc)}
        stein.append(entry)
        if not entry["holds"] and first is None:
            first = (
                f"integral inequality fails at t={t:.6g}, eps1={e1:.6g}, epsk={ek:.6g}: "
                f"lhs={entry['lhs']}, rhs={entry['rhs']}"
            )
    gauss = gaussian_cross_checks(check, seed)
    for g in gauss:
        if not g["holds"] and first is None:
            first = f"gaussian check '{g['case']}' off: value={g['value']:.6g}, reference={g['reference']:.6g}"
    ok = first is None
    report = {
        "command": "check",
        "software_version": __version__,
        "settings": check.__dict__,
        "stein": stein,
        "gaussian": gauss,
        "ok": ok,
    }
    return ok, _jsonable(report), first
