"""Synthetic models and replication experiments.

Two generators (a quadratic single-index model in p=6 and an inverse
regression model in p=20), the three-way estimator comparison (full-space
NW, NW on the true reduction, NW on a fitted reduction), replication tables
with the printed-formula EMSE, the oracle-equivalence and CI-coverage
experiments, and kernel density data for plotting estimate distributions.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ArgumentError, NumericError, RednwError
from .kernels import RadialKernel, builtin_profile, make_kernel, second_moment
from .npregress import BandwidthRule, NWConfig, bandwidth, nw_batch, nw_estimate
from .reduction import ReductionBasis, oracle_basis, pfc_fit, pls_fit, sir_fit

METHOD_NAMES = ("np", "npr", "nprt")
NPRT_REDUCTIONS = ("pls", "pfc", "sir", "root_n_oracle")

_MASK = (1 << 63) - 1


def _tag(name: str) -> int:
    # stable across processes (builtin hash() is salted per run)
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big") & _MASK


_TAG_MODEL1 = _tag("model1")
_TAG_MODEL2 = _tag("model2")
_TAG_POINTS = _tag("test-points")
_TAG_ORACLE = _tag("root-n-perturbation")


def _rng(*entropy: int) -> np.random.Generator:
    # counter-based generator so every (seed, stage, n, rep) cell owns an
    # independent, recomputable stream
    seq = np.random.SeedSequence(entropy=[int(e) & _MASK for e in entropy])
    return np.random.Generator(np.random.Philox(seq))


def _psd_sqrt(m: NDArray[np.floating]) -> NDArray[np.floating]:
    # symmetric square root; tolerates exactly singular covariances
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    if vals[0] < -1e-10 * max(abs(vals[-1]), 1.0):
        raise NumericError(f"covariance has negative eigenvalue {vals[0]:.3e}")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def _default_s_matrix() -> NDArray[np.floating]:
    path = resources.files("rednw").joinpath("_data/model2_s.csv")
    with resources.as_file(path) as p:
        return np.loadtxt(p, delimiter=",")


@dataclass(frozen=True)
class Model1Config:
    """Quadratic single-index design: Y = (beta0' X)^2 + eps.

    X ~ N(0, Sigma) with Sigma = sigma_signal * b b' +
    sigma_noise_cov * (I - b b') for the unit vector b = beta0.
    """

    p: int = 6
    beta0: NDArray[np.floating] | None = None
    sigma_signal: float = 5.0
    sigma_noise_cov: float = 0.1
    eps_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ArgumentError(f"p must be >= 1, got {self.p}")
        b = np.ones(self.p) / math.sqrt(self.p) if self.beta0 is None \
            else np.asarray(self.beta0, dtype=float).ravel()
        if b.shape != (self.p,):
            raise ArgumentError(f"beta0 must have length p={self.p}, got {b.shape}")
        nb = float(np.linalg.norm(b))
        if nb < 1e-12:
            raise ArgumentError("beta0 must be nonzero")
        object.__setattr__(self, "beta0", b / nb)
        if self.sigma_signal < 0 or self.sigma_noise_cov < 0 or self.eps_sd < 0:
            raise ArgumentError("variance parameters must be >= 0")

    def covariance(self) -> NDArray[np.floating]:
        bb = np.outer(self.beta0, self.beta0)
        return self.sigma_signal * bb + self.sigma_noise_cov * (np.eye(self.p) - bb)

    def truth(self, x: NDArray[np.floating]) -> NDArray[np.floating] | float:
        w = np.asarray(x, dtype=float) @ self.beta0
        return w * w


@dataclass(frozen=True)
class Model2Config:
    """Inverse regression design: Y ~ N(0, y_sd^2), X | Y=y ~ N(nu_y, Delta).

    nu_y = A * (f_{y,1} + f_{y,2}) with f_y = (y - EY, |y| - E|Y|) centered
    at the population, Delta = delta_scale * S S' for a fixed S drawn once
    at the recorded s_seed and shipped as package data.
    """

    p: int = 20
    y_sd: float = 5.0
    A: NDArray[np.floating] | None = None
    delta_scale: float = 0.1
    S: NDArray[np.floating] | None = None
    s_seed: int = 31415926
    seed: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ArgumentError(f"p must be >= 1, got {self.p}")
        if self.A is None:
            a = np.zeros(self.p)
            a[:4] = [0.5, 0.5, -0.5, -0.5]
        else:
            a = np.asarray(self.A, dtype=float).ravel()
        if a.shape != (self.p,):
            raise ArgumentError(f"A must have length p={self.p}, got {a.shape}")
        object.__setattr__(self, "A", a)
        s = _default_s_matrix() if self.S is None else np.asarray(self.S, dtype=float)
        if s.shape != (self.p, self.p):
            raise ArgumentError(f"S must be {self.p}x{self.p}, got {s.shape}")
        object.__setattr__(self, "S", s)
        if not self.delta_scale > 0:
            raise ArgumentError(f"delta_scale must be > 0, got {self.delta_scale}")
        delta = self.delta_scale * (s @ s.T)
        cond = float(np.linalg.cond(delta))
        if cond > 1e12:
            raise ArgumentError(f"Delta condition number {cond:.3e} exceeds 1e12; choose a better S")

    @property
    def delta(self) -> NDArray[np.floating]:
        return self.delta_scale * (self.S @ self.S.T)

    @property
    def e_abs_y(self) -> float:
        return self.y_sd * math.sqrt(2.0 / math.pi)

    @property
    def beta_pop(self) -> NDArray[np.floating]:
        b = np.linalg.solve(self.delta, self.A)
        return b / float(np.linalg.norm(b))

    def fy(self, y: NDArray[np.floating]) -> NDArray[np.floating]:
        y = np.asarray(y, dtype=float)
        return np.column_stack([y, np.abs(y) - self.e_abs_y])


def gen_model1(cfg: Model1Config, n: int, rng_stream: int = 0):
    """Draw (X, Y, truth) with X rows i.i.d. N(0, Sigma)."""
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    rng = _rng(cfg.seed, _TAG_MODEL1, n, rng_stream)
    factor = _psd_sqrt(cfg.covariance())
    X = rng.standard_normal((n, cfg.p)) @ factor
    eps = rng.normal(0.0, cfg.eps_sd, n) if cfg.eps_sd > 0 else np.zeros(n)
    Y = (X @ cfg.beta0) ** 2 + eps
    return X, Y, cfg.truth


def gen_model2(cfg: Model2Config, n: int, rng_stream: int = 0):
    """Draw (X, Y, beta_pop) from the inverse regression model."""
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    rng = _rng(cfg.seed, _TAG_MODEL2, n, rng_stream)
    Y = rng.normal(0.0, cfg.y_sd, n)
    f_sum = Y + np.abs(Y) - cfg.e_abs_y
    X = np.outer(f_sum, cfg.A) + rng.standard_normal((n, cfg.p)) @ _psd_sqrt(cfg.delta)
    return X, Y, cfg.beta_pop


def default_bandwidth_rule(cfg) -> BandwidthRule:
    """The simulation bandwidth: c * n^(-1/(4+p)), c=5 (p=6) or c=10 (p=20)."""
    c = 5.0 if isinstance(cfg, Model1Config) else 10.0
    return BandwidthRule(kind="power_rule", constant=c, exponent_dim="ambient_p")


def undersmoothed_rule(constant: float = 2.0, exponent: float = 0.3) -> BandwidthRule:
    """Bandwidth in the reduced dimension with an undersmoothing exponent.

    For d=1 and a second-order kernel the CI theory needs the exponent
    strictly inside (1/5, 1); the default 0.3 sits comfortably there.
    """
    return BandwidthRule(kind="power_rule", constant=constant,
                         exponent_dim="reduced_d", exponent=exponent)


def draw_test_points(cfg, m: int = 10) -> NDArray[np.floating]:
    """m points from the model's X distribution at a recorded sub-stream."""
    if m < 1:
        raise ArgumentError(f"m must be >= 1, got {m}")
    rng = _rng(cfg.seed, _TAG_POINTS)
    if isinstance(cfg, Model1Config):
        return rng.standard_normal((m, cfg.p)) @ _psd_sqrt(cfg.covariance())
    y = rng.normal(0.0, cfg.y_sd, m)
    f_sum = y + np.abs(y) - cfg.e_abs_y
    return np.outer(f_sum, cfg.A) + rng.standard_normal((m, cfg.p)) @ _psd_sqrt(cfg.delta)


@dataclass(frozen=True)
class MethodSpec:
    """One estimator column: np (full space), npr (true reduction), nprt
    (fitted reduction via ``reduction`` in NPRT_REDUCTIONS)."""

    method: str
    reduction: str | None = None
    d: int = 1

    def __post_init__(self):
        if self.method not in METHOD_NAMES:
            raise ArgumentError(f"method must be one of {METHOD_NAMES}, got {self.method!r}")
        if self.method == "nprt":
            if self.reduction not in NPRT_REDUCTIONS:
                raise ArgumentError(
                    f"nprt needs reduction in {NPRT_REDUCTIONS}, got {self.reduction!r}")
        elif self.reduction is not None:
            raise ArgumentError(f"method {self.method!r} does not take a reduction")
        if self.d < 1:
            raise ArgumentError(f"d must be >= 1, got {self.d}")

    @property
    def label(self) -> str:
        return self.method.upper()


def emse(estimates: Sequence[float] | NDArray[np.floating]) -> float:
    """Replication spread (1/N) sum (est_i - mean(est))^2.

    The printed formula subtracts the mean of the estimates, not the truth,
    so this is the empirical variance of the replication distribution.
    """
    v = np.asarray(estimates, dtype=float).ravel()
    if v.size < 1:
        raise ArgumentError("emse needs at least one estimate")
    return float(np.mean((v - v.mean()) ** 2))


@dataclass(frozen=True)
class CellStats:
    point_id: int
    n: int
    method: str
    emse: float
    variance: float
    mean_estimate: float
    n_rep: int
    n_missing: int
    true_mse: float | None


@dataclass(frozen=True)
class ReplicationTable:
    cells: tuple[CellStats, ...]
    test_points: NDArray[np.floating]
    ns: tuple[int, ...]
    methods: tuple[str, ...]
    n_rep: int
    base_seed: int
    # raw per-replication estimates keyed (point_id, n, method), NaN for
    # missing; populated only when run_replications(keep_estimates=True)
    estimates: dict | None = None

    @property
    def missing_rate(self) -> float:
        total = sum(c.n_rep + c.n_missing for c in self.cells)
        return sum(c.n_missing for c in self.cells) / total if total else 0.0

    def cell(self, point_id: int, n: int, method: str) -> CellStats:
        for c in self.cells:
            if (c.point_id, c.n, c.method) == (point_id, n, method.upper()):
                return c
        raise ArgumentError(f"no cell for point={point_id}, n={n}, method={method!r}")


def _true_direction(cfg) -> NDArray[np.floating]:
    return cfg.beta0 if isinstance(cfg, Model1Config) else cfg.beta_pop


def _generate(cfg, n: int, rep: int):
    if isinstance(cfg, Model1Config):
        return gen_model1(cfg, n, rng_stream=rep)[:2]
    return gen_model2(cfg, n, rng_stream=rep)[:2]


def _fit_basis(spec: MethodSpec, cfg, X, Y, rep: int, base_seed: int) -> ReductionBasis:
    p = X.shape[1]
    if spec.method == "np":
        return oracle_basis(np.eye(p))
    if spec.method == "npr":
        return oracle_basis(_true_direction(cfg)[None, :])
    if spec.reduction == "pls":
        return pls_fit(X, Y, spec.d)
    if spec.reduction == "pfc":
        return pfc_fit(X, Y, lambda y: np.column_stack([y, np.abs(y)]), spec.d)
    if spec.reduction == "sir":
        return sir_fit(X, Y, None, spec.d)
    # root_n_oracle: the true direction plus an n^(-1/2) perturbation whose
    # Gaussian draw is shared across n (paired comparisons across sizes)
    g = _rng(base_seed, _TAG_ORACLE, rep).standard_normal(p)
    b = _true_direction(cfg) + g / math.sqrt(X.shape[0])
    return oracle_basis(b[None, :])


def _one_rep(cfg, methods, n: int, rep: int, base_seed: int,
             test_points, rule: BandwidthRule, kernels: dict) -> dict:
    X, Y = _generate(cfg, n, rep)
    p = X.shape[1]
    out = {}
    for spec in methods:
        dim = p if spec.method == "np" else spec.d
        config = NWConfig(kernel=kernels[dim], bandwidth=rule, d=dim)
        est = np.full(test_points.shape[0], np.nan)
        try:
            basis = _fit_basis(spec, cfg, X, Y, rep, base_seed)
            for res in nw_batch(config, basis, X, Y, test_points):
                if res.ok:
                    est[res.index] = res.fit.eta_hat
        except RednwError:
            pass  # fit-level failure leaves the whole row missing
        out[spec.label] = est
    return out


def run_replications(cfg, methods: Sequence[MethodSpec], ns: Sequence[int],
                     test_points: NDArray[np.floating], n_rep: int,
                     base_seed: int | None = None,
                     bandwidth_rule: BandwidthRule | None = None,
                     n_threads: int = 1, keep_estimates: bool = False) -> ReplicationTable:
    """Replicated estimator comparison on fixed test points.

    For each (n, rep) draws a fresh dataset from its own RNG stream, fits
    every method, and evaluates all test points; cells aggregate emse,
    sample variance, and mean per (point, n, method). Empty windows and
    failed fits become missing entries with counts. Results are identical
    for any n_threads.

    Args:
        cfg: Model1Config or Model2Config.
        base_seed: defaults to cfg.seed.
        bandwidth_rule: defaults to the model's published power rule.
    """
    methods = list(methods)
    if not methods:
        raise ArgumentError("need at least one MethodSpec")
    labels = [m.label for m in methods]
    if len(set(labels)) != len(labels):
        raise ArgumentError(f"duplicate method labels {labels}; run variants separately")
    ns = [int(n) for n in ns]
    if not ns or any(n < 2 for n in ns):
        raise ArgumentError(f"sample sizes must all be >= 2, got {ns}")
    test_points = np.atleast_2d(np.asarray(test_points, dtype=float))
    if test_points.shape[1] != cfg.p:
        raise ArgumentError(f"test points have {test_points.shape[1]} columns, model has p={cfg.p}")
    if n_rep < 1:
        raise ArgumentError(f"n_rep must be >= 1, got {n_rep}")
    if base_seed is None:
        base_seed = cfg.seed
    cfg_run = replace(cfg, seed=base_seed)
    rule = bandwidth_rule if bandwidth_rule is not None else default_bandwidth_rule(cfg)
    dims = sorted({cfg.p if m.method == "np" else m.d for m in methods})
    profile = builtin_profile("triweight_poly3")
    kernels = {dim: make_kernel(profile, dim) for dim in dims}

    tasks = [(n, rep) for n in ns for rep in range(n_rep)]

    def work(task):
        n, rep = task
        return task, _one_rep(cfg_run, methods, n, rep, base_seed, test_points, rule, kernels)

    results: dict[tuple[int, int], dict] = {}
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            for key, val in ex.map(work, tasks):
                results[key] = val
    else:
        for task in tasks:
            key, val = work(task)
            results[key] = val

    truths = cfg.truth(test_points) if isinstance(cfg, Model1Config) else None
    cells = []
    kept = {} if keep_estimates else None
    for j in range(test_points.shape[0]):
        for n in ns:
            # fixed (n, rep, point) aggregation order keeps cells bit-stable
            stacked = {lab: np.array([results[(n, rep)][lab][j] for rep in range(n_rep)])
                       for lab in labels}
            for lab in labels:
                v = stacked[lab]
                if kept is not None:
                    kept[(j, n, lab)] = v.copy()
                good = v[~np.isnan(v)]
                n_missing = int(np.isnan(v).sum())
                if good.size:
                    cell_emse = emse(good)
                    variance = float(np.var(good, ddof=1)) if good.size > 1 else 0.0
                    mean_est = float(good.mean())
                    t_mse = float(np.mean((good - truths[j]) ** 2)) if truths is not None else None
                else:
                    cell_emse, variance, mean_est, t_mse = math.nan, math.nan, math.nan, None
                cells.append(CellStats(point_id=j, n=n, method=lab, emse=cell_emse,
                                       variance=variance, mean_estimate=mean_est,
                                       n_rep=int(good.size), n_missing=n_missing,
                                       true_mse=t_mse))
    return ReplicationTable(cells=tuple(cells), test_points=test_points,
                            ns=tuple(ns), methods=tuple(labels),
                            n_rep=n_rep, base_seed=base_seed, estimates=kept)


def recompute_cell(cfg, spec: MethodSpec, test_points: NDArray[np.floating],
                   point_id: int, n: int, n_rep: int, base_seed: int,
                   bandwidth_rule: BandwidthRule | None = None,
                   n_threads: int = 1) -> CellStats:
    """Recompute one table cell from its coordinates alone.

    Reproduces the stream of every replication that fed the cell, so the
    result is bit-identical to the full run's cell at any thread count.
    """
    table = run_replications(cfg, [spec], [n], test_points, n_rep,
                             base_seed=base_seed, bandwidth_rule=bandwidth_rule,
                             n_threads=n_threads)
    return table.cell(point_id, n, spec.label)


@dataclass(frozen=True)
class EquivalenceRow:
    n: int
    h: float
    median_stat: float
    n_used: int
    n_missing: int


def equivalence_experiment(cfg: Model1Config, ns: Sequence[int], n_rep: int,
                           x0: NDArray[np.floating],
                           reduction: str | ReductionBasis = "pls",
                           bandwidth_rule: BandwidthRule | None = None,
                           base_seed: int | None = None) -> list[EquivalenceRow]:
    """Median of sqrt(n h^d) |eta_hat(x0) - xi_hat(w0)| per sample size.

    eta_hat runs on the fitted reduction, xi_hat on the true one, same
    kernel and bandwidth. With a root-n consistent reduction the statistic
    drifts to zero as n grows; a fixed wrong direction is the negative
    control and does not decay.

    Args:
        reduction: "pls", "root_n_oracle", "wrong_direction", "oracle"
            (forces the true basis; statistic is exactly 0), or an explicit
            ReductionBasis used verbatim at every replication.
    """
    if isinstance(reduction, str) and reduction not in (
            "pls", "root_n_oracle", "wrong_direction", "oracle"):
        raise ArgumentError(f"unknown reduction choice {reduction!r}")
    if base_seed is None:
        base_seed = cfg.seed
    cfg_run = replace(cfg, seed=base_seed)
    rule = bandwidth_rule if bandwidth_rule is not None else undersmoothed_rule()
    kernel = make_kernel(builtin_profile("triweight_poly3"), 1)
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (cfg.p,):
        raise ArgumentError(f"x0 must have length p={cfg.p}, got {x0.shape}")
    true_basis = oracle_basis(cfg.beta0[None, :])

    rows = []
    for n in ns:
        h = bandwidth(rule, n=n, p=cfg.p, d=1)
        stats = []
        n_missing = 0
        for rep in range(n_rep):
            X, Y, _ = gen_model1(cfg_run, n, rng_stream=rep)
            if isinstance(reduction, ReductionBasis):
                basis = reduction
            elif reduction == "oracle":
                basis = true_basis
            elif reduction == "pls":
                basis = pls_fit(X, Y, 1)
            elif reduction == "root_n_oracle":
                g = _rng(base_seed, _TAG_ORACLE, rep).standard_normal(cfg.p)
                basis = oracle_basis((cfg.beta0 + g / math.sqrt(n))[None, :])
            else:  # wrong_direction: fixed unit vector misaligned with beta0
                wrong = np.zeros(cfg.p)
                wrong[0] = 1.0
                basis = oracle_basis(wrong[None, :])
            config = NWConfig(kernel=kernel, bandwidth=BandwidthRule(kind="fixed", h_fixed=h), d=1)
            try:
                eta = nw_estimate(config, basis, X, Y, x0).eta_hat
                xi = nw_estimate(config, true_basis, X, Y, x0).eta_hat
            except RednwError:
                n_missing += 1
                continue
            stats.append(math.sqrt(n * h) * abs(eta - xi))
        if not stats:
            raise NumericError(f"every replication at n={n} hit an empty window")
        rows.append(EquivalenceRow(n=int(n), h=float(h),
                                   median_stat=float(np.median(stats)),
                                   n_used=len(stats), n_missing=n_missing))
    return rows


@dataclass(frozen=True)
class CoverageResult:
    coverage: float
    level: float
    n: int
    n_used: int
    n_excluded: int
    truth: float
    median_ci_width: float


def coverage_experiment(cfg: Model1Config, n: int, n_rep: int,
                        x0: NDArray[np.floating], level: float = 0.95,
                        bandwidth_rule: BandwidthRule | None = None,
                        base_seed: int | None = None) -> CoverageResult:
    """Fraction of replications whose CI covers the true eta(x0).

    Uses the true reduction and an undersmoothing bandwidth; the rule must
    scale in the reduced dimension with exponent strictly inside
    (1/(2q+d), 1/d) so the CLT's bias condition holds.
    """
    rule = bandwidth_rule if bandwidth_rule is not None else undersmoothed_rule()
    kernel = make_kernel(builtin_profile("triweight_poly3"), 1)
    q = kernel.moment_order
    d = 1
    if rule.kind == "power_rule":
        if rule.exponent_dim != "reduced_d":
            raise ArgumentError("coverage experiment needs exponent_dim='reduced_d'")
        e = rule.exponent if rule.exponent is not None else 1.0 / (4.0 + d)
        lo, hi = 1.0 / (2 * q + d), 1.0 / d
        if not (lo < e < hi):
            raise ArgumentError(
                f"undersmoothing needs exponent strictly inside ({lo:.4g}, {hi:.4g}), got {e}")
    if base_seed is None:
        base_seed = cfg.seed
    cfg_run = replace(cfg, seed=base_seed)
    x0 = np.asarray(x0, dtype=float).ravel()
    truth = float(cfg.truth(x0))
    basis = oracle_basis(cfg.beta0[None, :])
    config = NWConfig(kernel=kernel, bandwidth=rule, d=1, ci_level=level)
    covered = 0
    used = 0
    excluded = 0
    widths = []
    for rep in range(n_rep):
        X, Y, _ = gen_model1(cfg_run, n, rng_stream=rep)
        try:
            fit = nw_estimate(config, basis, X, Y, x0)
        except RednwError:
            excluded += 1
            continue
        used += 1
        covered += int(fit.ci_lo <= truth <= fit.ci_hi)
        widths.append(fit.ci_hi - fit.ci_lo)
    if used == 0:
        raise NumericError(f"every replication at n={n} hit an empty window")
    return CoverageResult(coverage=covered / used, level=level, n=n, n_used=used,
                          n_excluded=excluded, truth=truth,
                          median_ci_width=float(np.median(widths)))


def estimate_density_data(estimates: Sequence[float] | NDArray[np.floating],
                          grid: Sequence[float]) -> list[tuple[float, float]]:
    """Kernel density of a replication distribution on a grid.

    Triweight kernel with a Silverman-style bandwidth computed from the
    kernel's own constants; degenerate samples fall back to a nominal width
    so a point mass shows as a narrow spike.
    """
    v = np.asarray(estimates, dtype=float).ravel()
    if v.size < 10:
        raise ArgumentError(f"density data needs at least 10 estimates, got {v.size}")
    g = np.asarray(grid, dtype=float).ravel()
    kernel = make_kernel(builtin_profile("triweight_poly3"), 1)
    mu2 = second_moment(kernel)
    factor = (8.0 * math.sqrt(math.pi) * kernel.l2_const / (3.0 * mu2 * mu2)) ** 0.2
    iqr = float(np.subtract(*np.percentile(v, [75, 25])))
    scale = min(float(np.std(v)), iqr / 1.349) if iqr > 0 else float(np.std(v))
    if scale <= 0:
        scale = 1e-2 * max(1.0, abs(float(v.mean())))
    h = factor * scale * v.size ** -0.2
    dens = kernel.weights(np.abs(g[:, None] - v[None, :]) / h).sum(axis=1) / (v.size * h)
    return [(float(gi), float(di)) for gi, di in zip(g, dens)]
