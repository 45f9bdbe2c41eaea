"""Confounding-strength estimators: population, plug-in, tau-corrected, RMT.

All four share the same skeleton: estimate tau = (1/d)Tr(Sigma^-1), estimate
theta = sigma_alpha2 / sigma_beta2 by root-finding a derivative-style scalar
objective, and combine them through zeta = tau theta / (1 + tau theta).
They differ in which spectrum and regression vector feed the objective and in
whether random-matrix corrections are applied.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import Degenerate, InvalidInput, RankDeficient
from .spectral import (
    Spectrum,
    eta_derivative,
    kernel_spectrum,
    min_norm_regress,
    rank_tolerance,
    solve_eta,
    stieltjes,
)

__all__ = [
    "ConfoundingEstimate",
    "SolverDiagnostics",
    "ThetaObjective",
    "DatasetCache",
    "PopulationCache",
    "tau_plugin",
    "tau_rmt",
    "noise_estimate_S",
    "quadform_estimate",
    "quadform_derivative_estimate",
    "stieltjes_estimate",
    "logdet_estimate_g1",
    "logprob_rmt",
    "h_rmt",
    "solve_theta",
    "logprob_pop",
    "logprob_plugin",
    "estimate_all",
]

DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class SolverDiagnostics:
    root_found: bool
    objective_residual: float
    bracket: tuple[float, float]
    evaluations: int


@dataclass(frozen=True)
class ConfoundingEstimate:
    method: str                 # population | plugin | tau_corrected | rmt
    tau: float
    theta: float
    zeta: float
    diagnostics: SolverDiagnostics
    degenerate: bool = False


@dataclass(frozen=True)
class ThetaObjective:
    """Which scalar function to root-find and on what interval."""

    kind: str                   # pop_derivative | plugin_derivative | rmt_h
    search_cap: float = 100.0
    tolerance: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("pop_derivative", "plugin_derivative", "rmt_h"):
            raise InvalidInput(f"unknown objective kind {self.kind!r}")
        if self.search_cap <= 0 or self.tolerance <= 0:
            raise InvalidInput("search_cap and tolerance must be positive")


def zeta_from(tau: float, theta: float) -> float:
    x = tau * theta
    return x / (1.0 + x)


class PopulationCache:
    """Eigendecomposition of Sigma and beta_stat energies, shared across theta."""

    def __init__(self, Sigma: np.ndarray, beta_stat: np.ndarray):
        Sigma = 0.5 * (Sigma + Sigma.T)
        self.eigs, vecs = np.linalg.eigh(Sigma)
        d = len(self.eigs)
        if self.eigs[0] <= rank_tolerance(d, d, self.eigs[-1]):
            raise RankDeficient("Sigma is numerically singular")
        norm2 = float(beta_stat @ beta_stat)
        if norm2 == 0.0:
            raise Degenerate("beta_stat is zero")
        # squared coordinates of the normalized vector in the eigenbasis
        self.energy = (vecs.T @ beta_stat) ** 2 / norm2
        self.tau = float(np.mean(1.0 / self.eigs))

    def quadforms(self, theta: float) -> tuple[float, float]:
        """Q_k = <v, Sigma (Sigma + theta)^-k v> for the unit vector v, k = 1, 2."""
        r = self.eigs + theta
        q1 = float(np.sum(self.energy * self.eigs / r))
        q2 = float(np.sum(self.energy * self.eigs / r**2))
        return q1, q2

    def logprob(self, theta: float) -> tuple[float, float]:
        q1, q2 = self.quadforms(theta)
        if q1 <= 0:
            raise Degenerate("vanishing quadratic form")
        m = float(np.mean(1.0 / (self.eigs + theta)))
        value = float(np.mean(np.log(self.eigs + theta))) + np.log(q1)
        return value, m - q2 / q1

    def derivative(self, theta: float) -> float:
        return self.logprob(theta)[1]

    def dispersion(self, theta: float) -> float:
        """Variance of 1/(lambda + theta) over the spectrum; zero means degenerate."""
        r = 1.0 / (self.eigs + theta)
        return float(np.var(r))


class DatasetCache:
    """One-time spectral work for a dataset (X, Y); reused across many theta.

    Root-finding evaluates the objectives at dozens of points, so the
    eigendecomposition of the sample covariance, the min-norm coefficients,
    and the noise estimate are computed once here.
    """

    def __init__(self, X: np.ndarray, Y: np.ndarray):
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidInput("non-finite inputs")
        d, n = X.shape
        if d >= n:
            raise InvalidInput("need d < n")
        if Y.shape != (n,):
            raise InvalidInput("Y length must match columns of X")
        self.X, self.Y = X, Y
        self.d, self.n = d, n
        self.gamma = d / n

        cov = (X @ X.T) / n
        cov = 0.5 * (cov + cov.T)
        self.eigs, self.vecs = np.linalg.eigh(cov)
        if self.eigs[0] <= rank_tolerance(d, n, self.eigs[-1]):
            raise RankDeficient("sample covariance is numerically singular")
        self.cov_spec = Spectrum(eigenvalues=self.eigs, size=d)
        self.kernel_spec = kernel_spectrum(self.cov_spec, n)

        self.beta_hat = min_norm_regress(X, Y)
        self.beta_energy = (self.vecs.T @ self.beta_hat) ** 2
        self.beta_norm2 = float(self.beta_hat @ self.beta_hat)

        resid = Y - X.T @ self.beta_hat
        self.S = float(resid @ resid) / ((1.0 - self.gamma) * n * d)
        self.m0 = float(np.mean(1.0 / self.eigs))   # tau_plugin = m_cov(0)

        self._eta_cache: dict[float, float] = {}

    def eta(self, theta: float) -> float:
        if theta not in self._eta_cache:
            self._eta_cache[theta] = solve_eta(self.kernel_spec, theta)
        return self._eta_cache[theta]

    def eta_prime(self, theta: float) -> float:
        return eta_derivative(self.kernel_spec, theta, self.eta(theta))

    def resolvent_quadform(self, shift: float, power: int) -> float:
        """(1/d) <beta_hat, cov (cov + shift)^-power beta_hat>."""
        r = self.eigs + shift
        return float(np.sum(self.beta_energy * self.eigs / r**power)) / self.d

    @cached_property
    def quadform_denominator(self) -> float:
        return self.beta_norm2 / self.d - self.S * self.gamma * self.m0

    def quadform(self, theta: float) -> float:
        eta = self.eta(theta)
        num = (
            self.resolvent_quadform(-eta, 1)
            - self.S / theta
            - self.S * (1.0 - self.gamma) / eta
        )
        den = self.quadform_denominator
        if abs(den) < 1e-12:
            raise Degenerate("beta_hat energy at the noise floor")
        return num / den

    def quadform_derivative(self, theta: float) -> float:
        # -d/dtheta of quadform via the eta chain rule (d eta / d theta = -eta')
        eta = self.eta(theta)
        ep = self.eta_prime(theta)
        num = (
            ep * self.resolvent_quadform(-eta, 2)
            - self.S / theta**2
            + self.S * ep * (1.0 - self.gamma) / eta**2
        )
        den = self.quadform_denominator
        if abs(den) < 1e-12:
            raise Degenerate("beta_hat energy at the noise floor")
        return num / den

    def stieltjes_pop_estimate(self, theta: float) -> float:
        eta = self.eta(theta)
        return -(eta / theta - self.gamma + 1.0) / (self.gamma * theta)

    def h_rmt(self, theta: float) -> float:
        q = self.quadform(theta)
        if abs(q) < 1e-14:
            raise Degenerate("quadform estimate vanished")
        return self.stieltjes_pop_estimate(theta) - self.quadform_derivative(theta) / q

    def logprob_plugin(self, theta: float) -> tuple[float, float]:
        q1 = self.d * self.resolvent_quadform(theta, 1) / self.beta_norm2
        q2 = self.d * self.resolvent_quadform(theta, 2) / self.beta_norm2
        if q1 <= 0:
            raise Degenerate("vanishing quadratic form")
        m = float(np.mean(1.0 / (self.eigs + theta)))
        value = float(np.mean(np.log(self.eigs + theta))) + np.log(q1)
        return value, m - q2 / q1

    def dispersion(self, theta: float) -> float:
        return float(np.var(1.0 / (self.eigs + theta)))


# ---------------------------------------------------------------------------
# functional wrappers (one-shot API over the caches)

def tau_plugin(X: np.ndarray) -> float:
    """(1/d) Tr(cov^-1) over the sample covariance spectrum."""
    X = np.asarray(X, dtype=float)
    d, n = X.shape
    if d >= n:
        raise InvalidInput("need d < n")
    cov = (X @ X.T) / n
    eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    if eigs[0] <= rank_tolerance(d, n, eigs[-1]):
        raise RankDeficient("sample covariance is numerically singular")
    return float(np.mean(1.0 / eigs))


def tau_rmt(X: np.ndarray) -> float:
    """(1 - gamma) tau_plugin: the de-biased trace of the inverse covariance."""
    d, n = np.asarray(X).shape
    return (1.0 - d / n) * tau_plugin(X)


def noise_estimate_S(X: np.ndarray, Y: np.ndarray) -> float:
    """(1 - gamma)^-1 ||Y||^2_{I - X^+ X} / (n d); estimates sigma_stat2 / d."""
    return DatasetCache(X, Y).S


def quadform_estimate(X: np.ndarray, Y: np.ndarray, theta: float) -> float:
    if theta <= 0:
        raise InvalidInput("theta must be positive")
    return DatasetCache(X, Y).quadform(theta)


def quadform_derivative_estimate(X: np.ndarray, Y: np.ndarray, theta: float) -> float:
    if theta <= 0:
        raise InvalidInput("theta must be positive")
    return DatasetCache(X, Y).quadform_derivative(theta)


def stieltjes_estimate(X: np.ndarray, theta: float) -> float:
    """Consistent estimate of the population Stieltjes transform m_nu(-theta)."""
    if theta <= 0:
        raise InvalidInput("theta must be positive")
    cache = DatasetCache(X, np.zeros(np.asarray(X).shape[1]))
    return cache.stieltjes_pop_estimate(theta)


def logdet_estimate_g1(
    X: np.ndarray,
    theta: float,
    rng: np.random.Generator,
    noise_draws: int = 1,
) -> float:
    """Consistent estimate of (1/d) log det(Sigma + theta) from noised data.

    Uses W = X + sqrt(theta) E with fresh standard-normal E, then removes the
    Marchenko-Pastur log-moment (gamma - 1)/gamma * log(1 - gamma) - 1 of the
    white Wishart factor. The correction as printed elsewhere with a negative
    log argument fails the identity-covariance check; this form is validated
    against (1/d) log det(Sigma + theta) directly in the tests.
    """
    if theta <= 0:
        raise InvalidInput("theta must be positive")
    if noise_draws < 1:
        raise InvalidInput("noise_draws must be >= 1")
    X = np.asarray(X, dtype=float)
    d, n = X.shape
    gamma = d / n
    correction = (1.0 - gamma) / gamma * np.log1p(-gamma) + 1.0
    vals = []
    for _ in range(noise_draws):
        W = X + np.sqrt(theta) * rng.standard_normal((d, n))
        G = (W @ W.T) / (n * theta)
        sign, logdet = np.linalg.slogdet(0.5 * (G + G.T))
        if sign <= 0:
            raise RankDeficient("noised Gram matrix not positive definite")
        vals.append(np.log(theta) + logdet / d + correction)
    return float(np.mean(vals))


def h_rmt(X: np.ndarray, Y: np.ndarray, theta: float) -> float:
    """Consistent estimate of the population log-likelihood derivative at theta."""
    if theta <= 0:
        raise InvalidInput("theta must be positive")
    return DatasetCache(X, Y).h_rmt(theta)


def logprob_pop(
    Sigma: np.ndarray, beta_stat: np.ndarray, theta: float
) -> tuple[float, float]:
    """Population log-probability objective and its theta-derivative."""
    if theta < 0:
        raise InvalidInput("theta must be nonnegative")
    return PopulationCache(Sigma, beta_stat).logprob(theta)


def logprob_plugin(X: np.ndarray, Y: np.ndarray, theta: float) -> tuple[float, float]:
    """Plug-in log-probability objective and its theta-derivative."""
    if theta < 0:
        raise InvalidInput("theta must be nonnegative")
    return DatasetCache(X, Y).logprob_plugin(theta)


# ---------------------------------------------------------------------------
# root-finding

GRID_POINTS = 64
GRID_START = 1e-4


def _refine_root(f, lo, hi, flo, fhi, tolerance, cap, budget=200):
    """Bisection/secant refinement of a bracketed sign change."""
    evals = 0
    for _ in range(budget):
        if hi - lo <= 1e-8 * cap:
            break
        denom = fhi - flo
        mid = 0.5 * (lo + hi)
        if denom != 0.0:
            sec = lo - flo * (hi - lo) / denom
            # keep the secant step only if it lands comfortably inside
            if not (lo + 0.1 * (hi - lo) < sec < hi - 0.1 * (hi - lo)):
                sec = mid
        else:
            sec = mid
        fs = f(sec)
        evals += 1
        if abs(fs) <= tolerance:
            return sec, fs, evals
        if (flo < 0) == (fs < 0):
            lo, flo = sec, fs
        else:
            hi, fhi = sec, fs
    root = lo if abs(flo) <= abs(fhi) else hi
    return root, f(root), evals + 1


def solve_theta(
    objective: ThetaObjective,
    X: np.ndarray | None = None,
    Y: np.ndarray | None = None,
    Sigma: np.ndarray | None = None,
    beta_stat: np.ndarray | None = None,
    cache: "DatasetCache | PopulationCache | None" = None,
) -> tuple[float, SolverDiagnostics]:
    """Root of the selected theta-objective on [grid start, search cap].

    Scans a 64-point geometric grid for sign changes, refines each bracket,
    and returns 0 with root_found=False when no sign change exists. With
    several candidate roots the one minimizing the log-probability objective
    wins (smallest |h| for the RMT kind, which has no log-probability).
    """
    kind = objective.kind
    if kind == "pop_derivative":
        pop = cache if isinstance(cache, PopulationCache) else None
        if pop is None:
            if Sigma is None or beta_stat is None:
                raise InvalidInput("population objective needs Sigma and beta_stat")
            pop = PopulationCache(Sigma, beta_stat)
        f = pop.derivative
        value = lambda t: pop.logprob(t)[0]
    else:
        ds = cache if isinstance(cache, DatasetCache) else None
        if ds is None:
            if X is None or Y is None:
                raise InvalidInput(f"{kind} objective needs X and Y")
            ds = DatasetCache(X, Y)
        if kind == "plugin_derivative":
            f = lambda t: ds.logprob_plugin(t)[1]
            value = lambda t: ds.logprob_plugin(t)[0]
        else:
            f = ds.h_rmt
            value = None

    cap = objective.search_cap
    grid = np.geomspace(max(GRID_START, objective.tolerance), cap, GRID_POINTS)
    fvals = np.array([f(t) for t in grid])
    evals = len(grid)

    roots: list[tuple[float, float, int]] = []
    for i in range(len(grid) - 1):
        if np.sign(fvals[i]) * np.sign(fvals[i + 1]) < 0:
            root, resid, used = _refine_root(
                f, grid[i], grid[i + 1], fvals[i], fvals[i + 1],
                objective.tolerance, cap,
            )
            roots.append((root, resid, used))
            evals += used
    if not roots:
        return 0.0, SolverDiagnostics(False, float("nan"), (0.0, cap), evals)

    if len(roots) > 1:
        if value is not None:
            # argmin of the log-probability among candidate roots and theta = 0
            candidates = [(value(r), r, res) for r, res, _ in roots]
            candidates.append((value(objective.tolerance), 0.0, float("nan")))
            evals += len(candidates)
            _, best, resid = min(candidates, key=lambda t: t[0])
        else:
            best, resid, _ = min(roots, key=lambda t: abs(t[1]))
    else:
        best, resid, _ = roots[0]
    if best == 0.0:
        return 0.0, SolverDiagnostics(False, float(resid), (0.0, cap), evals)
    return float(best), SolverDiagnostics(True, float(resid), (0.0, cap), evals)


# ---------------------------------------------------------------------------
# the four estimators

@dataclass(frozen=True)
class EstimatorConfig:
    theta_cap: float = 100.0
    tolerance: float = 1e-8
    # "h_root" finds a zero of the deterministic derivative estimate; the
    # alternative "logprob_argmin" minimizes the noised log-probability
    # estimate g1 + log g2 on the scan grid (stochastic, needs an rng).
    rmt_path: str = "h_root"


def logprob_rmt(
    X: np.ndarray,
    Y: np.ndarray,
    theta: float,
    rng: np.random.Generator,
    noise_draws: int = 1,
    cache: "DatasetCache | None" = None,
) -> float:
    """Stochastic estimate of the population log-probability at theta.

    Sum of the noised log-determinant estimate and the log of the quadratic
    form estimate; consistent for L^pop(theta) but random through the noise
    matrix, which is why the derivative-based root finder is the default.
    """
    if theta <= 0:
        raise InvalidInput("theta must be positive")
    ds = cache if cache is not None else DatasetCache(X, Y)
    q = ds.quadform(theta)
    if q <= 0:
        raise Degenerate("quadform estimate not positive")
    return logdet_estimate_g1(ds.X, theta, rng, noise_draws) + float(np.log(q))


def _solve_theta_logprob_argmin(
    ds: "DatasetCache", cfg: "EstimatorConfig", rng: np.random.Generator
) -> tuple[float, SolverDiagnostics]:
    """Grid argmin of the stochastic log-probability estimate."""
    grid = np.geomspace(max(GRID_START, cfg.tolerance), cfg.theta_cap, GRID_POINTS)
    best_t, best_v = 0.0, np.inf
    evals = 0
    for t in grid:
        try:
            v = logprob_rmt(ds.X, ds.Y, t, rng, cache=ds)
        except Degenerate:
            continue
        evals += 1
        if v < best_v:
            best_t, best_v = float(t), v
    found = np.isfinite(best_v)
    return best_t if found else 0.0, SolverDiagnostics(
        found, float("nan"), (0.0, cfg.theta_cap), evals
    )


def estimate_all(
    X: np.ndarray,
    Y: np.ndarray,
    Sigma: np.ndarray | None = None,
    beta_stat: np.ndarray | None = None,
    config: EstimatorConfig | None = None,
    cache: DatasetCache | None = None,
    rng: np.random.Generator | None = None,
) -> dict[str, ConfoundingEstimate]:
    """All estimators on one dataset; population only when (Sigma, beta_stat) given.

    Each estimate carries a degeneracy flag: the spectral dispersion of the
    resolvent 1/(lambda + theta_hat) below 1e-10 means no eigendirection is
    distinguished and theta is not identifiable.
    """
    cfg = config or EstimatorConfig()
    ds = cache if cache is not None else DatasetCache(X, Y)
    out: dict[str, ConfoundingEstimate] = {}

    t_plg = ds.m0
    th_plg, diag_plg = solve_theta(
        ThetaObjective("plugin_derivative", cfg.theta_cap, cfg.tolerance), cache=ds
    )
    out["plugin"] = ConfoundingEstimate(
        method="plugin",
        tau=t_plg,
        theta=th_plg,
        zeta=zeta_from(t_plg, th_plg),
        diagnostics=diag_plg,
        degenerate=ds.dispersion(th_plg) < DEGENERACY_TOL,
    )

    t_rmt = (1.0 - ds.gamma) * t_plg
    if cfg.rmt_path == "h_root":
        th_rmt, diag_rmt = solve_theta(
            ThetaObjective("rmt_h", cfg.theta_cap, cfg.tolerance), cache=ds
        )
    elif cfg.rmt_path == "logprob_argmin":
        if rng is None:
            raise InvalidInput("rmt_path='logprob_argmin' needs an rng")
        th_rmt, diag_rmt = _solve_theta_logprob_argmin(ds, cfg, rng)
    else:
        raise InvalidInput(f"unknown rmt_path {cfg.rmt_path!r}")
    out["rmt"] = ConfoundingEstimate(
        method="rmt",
        tau=t_rmt,
        theta=th_rmt,
        zeta=zeta_from(t_rmt, th_rmt),
        diagnostics=diag_rmt,
        degenerate=ds.dispersion(th_rmt) < DEGENERACY_TOL,
    )

    out["tau_corrected"] = ConfoundingEstimate(
        method="tau_corrected",
        tau=t_rmt,
        theta=th_plg,
        zeta=1.0 - 1.0 / (1.0 + t_rmt * th_plg),
        diagnostics=diag_plg,
        degenerate=out["plugin"].degenerate,
    )

    if Sigma is not None and beta_stat is not None:
        pop = PopulationCache(Sigma, beta_stat)
        th_pop, diag_pop = solve_theta(
            ThetaObjective("pop_derivative", cfg.theta_cap, cfg.tolerance), cache=pop
        )
        out["population"] = ConfoundingEstimate(
            method="population",
            tau=pop.tau,
            theta=th_pop,
            zeta=zeta_from(pop.tau, th_pop),
            diagnostics=diag_pop,
            degenerate=pop.dispersion(th_pop) < DEGENERACY_TOL,
        )

    return out
