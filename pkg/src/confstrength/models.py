"""Synthetic confounded causal models.

The generative recipe: draw the covariance spectrum from a Marchenko-Pastur
law, rotate it with Haar frames to build the mixing matrix M = U diag(sqrt
lambda) V_d^T, calibrate the confounder scale so the concentrated confounding
strength hits a target, then sample observations from the linear-Gaussian
structural equations x = M z, y = x^T beta + z^T alpha + eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import InvalidInput, RankDeficient
from .spectral import rank_tolerance

__all__ = [
    "CausalModel",
    "ObservationalData",
    "GroundTruth",
    "sample_mp_eigenvalues",
    "haar_semi_orthogonal",
    "build_model",
    "draw_observations",
    "ground_truth",
    "statistical_noise_limit_check",
    "mp_support",
    "mp_density",
]


def mp_support(c: float) -> tuple[float, float]:
    """Support endpoints (1 -+ sqrt(c))^2 of the Marchenko-Pastur law."""
    s = math.sqrt(c)
    return (1.0 - s) ** 2, (1.0 + s) ** 2


def mp_density(lam, c: float):
    """Marchenko-Pastur density sqrt((lam - c-)(c+ - lam)) / (2 pi c lam)."""
    lo, hi = mp_support(c)
    lam = np.asarray(lam, dtype=float)
    inside = np.clip((lam - lo) * (hi - lam), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(inside) / (2.0 * np.pi * c * lam)
    return np.where(lam > 0, out, 0.0)


def sample_mp_eigenvalues(d: int, c: float, rng: np.random.Generator) -> np.ndarray:
    """d i.i.d. draws from MP(c), c in (0, 1), by rejection from a uniform envelope."""
    if not (0.0 < c < 1.0):
        raise InvalidInput("c must lie in (0, 1)")
    if d < 1:
        raise InvalidInput("d must be >= 1")
    lo, hi = mp_support(c)
    res = optimize.minimize_scalar(
        lambda x: -mp_density(x, c), bounds=(lo, hi), method="bounded"
    )
    fmax = -res.fun * 1.000001  # guard against the optimizer undershooting
    out = np.empty(d)
    filled = 0
    while filled < d:
        m = max(2 * (d - filled), 64)
        lam = rng.uniform(lo, hi, size=m)
        u = rng.uniform(0.0, fmax, size=m)
        acc = lam[u <= mp_density(lam, c)]
        take = min(len(acc), d - filled)
        out[filled:filled + take] = acc[:take]
        filled += take
    return out


def haar_semi_orthogonal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed rows x cols frame with orthonormal columns.

    QR of a Gaussian matrix with the R-diagonal sign fix, which makes the
    distribution invariant under fixed orthogonal rotations.
    """
    if rows < cols:
        raise InvalidInput("rows must be >= cols")
    G = rng.standard_normal((rows, cols))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


@dataclass
class CausalModel:
    """Ground-truth generative model: x = M z, y = x^T beta + z^T alpha + eps.

    sigma_alpha2 / sigma_beta2 / sigma_eps2 are variances (the mechanism
    priors are N(0, sigma_alpha2 I_l) and N(0, sigma_beta2 I_d)).
    """

    mixing: np.ndarray          # d x l
    alpha: np.ndarray           # l
    beta: np.ndarray            # d
    sigma_eps2: float
    sigma_alpha2: float
    sigma_beta2: float
    # cached SVD factors of mixing (M = U diag(sqrt_eigs) V_d^T), set by build_model
    _svd: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        M = np.asarray(self.mixing, dtype=float)
        d, l = M.shape
        if l < d:
            raise InvalidInput("latent dimension l must be >= d")
        for s in (self.sigma_eps2, self.sigma_alpha2, self.sigma_beta2):
            if not (np.isfinite(s) and s >= 0):
                raise InvalidInput("variances must be finite and nonnegative")
        if self.alpha.shape != (l,) or self.beta.shape != (d,):
            raise InvalidInput("alpha/beta shapes do not match mixing")
        sv = np.linalg.svd(M, compute_uv=False) if self._svd is None else self._svd[1]
        if np.min(sv) ** 2 <= rank_tolerance(d, l, float(np.max(sv)) ** 2):
            raise RankDeficient("mixing matrix is not full row rank")

    @property
    def d(self) -> int:
        return self.mixing.shape[0]

    @property
    def l(self) -> int:
        return self.mixing.shape[1]

    @property
    def gamma_tilde(self) -> float:
        return self.l / self.d

    def svd_factors(self):
        """(U d x d, singular values d, V_d l x d) with M = U diag(s) V_d^T."""
        if self._svd is None:
            U, s, Vt = np.linalg.svd(self.mixing, full_matrices=False)
            self._svd = (U, s, Vt.T)
        return self._svd

    def covariance(self) -> np.ndarray:
        """Population covariance Sigma = M M^T."""
        U, s, _ = self.svd_factors()
        return (U * s**2) @ U.T

    def covariance_eigenvalues(self) -> np.ndarray:
        return np.sort(self.svd_factors()[1] ** 2)


@dataclass(frozen=True)
class ObservationalData:
    """Samples in columns: X is d x n, Y has length n; requires d < n."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        d, n = self.X.shape
        if self.Y.shape != (n,):
            raise InvalidInput("Y length must match the number of columns of X")
        if d >= n:
            raise InvalidInput("need d < n (gamma = d/n < 1)")

    @property
    def d(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def gamma(self) -> float:
        return self.d / self.n


@dataclass(frozen=True)
class GroundTruth:
    beta_stat: np.ndarray
    sigma_stat2: float
    zeta: float
    tau_pop: float
    theta_true: float


def build_model(
    d: int,
    gamma_tilde: float,
    c: float,
    zeta_target: float,
    sigma_beta2: float,
    sigma_eps2: float,
    rng: np.random.Generator,
    calibration: str = "exact",
) -> CausalModel:
    """Build a model whose concentrated confounding strength equals zeta_target.

    The covariance spectrum is an MP(c) sample; sigma_alpha2 is solved from
    tau * theta / (1 + tau * theta) = zeta_target using the realized
    tau = (1/d) sum 1/lambda_i, so the target is exact per instance.
    calibration="literal" instead applies the alternative printed rule
    sigma_alpha2 = (sigma_beta2 (1 - z) + z tau) / (1 - z), kept only for
    comparison experiments.
    """
    if not (0.0 <= zeta_target < 1.0):
        raise InvalidInput("zeta_target must lie in [0, 1)")
    if gamma_tilde < 1.0:
        raise InvalidInput("gamma_tilde must be >= 1")
    if sigma_beta2 <= 0:
        raise InvalidInput("sigma_beta2 must be positive")
    l = int(round(gamma_tilde * d))
    if l < d:
        raise InvalidInput("round(gamma_tilde * d) must be >= d")

    eigs = sample_mp_eigenvalues(d, c, rng)
    U = haar_semi_orthogonal(d, d, rng)
    V_d = haar_semi_orthogonal(l, d, rng)
    s = np.sqrt(eigs)
    M = (U * s) @ V_d.T

    tau = float(np.mean(1.0 / eigs))
    if calibration == "exact":
        sigma_alpha2 = zeta_target * sigma_beta2 / ((1.0 - zeta_target) * tau)
    elif calibration == "literal":
        sigma_alpha2 = (sigma_beta2 * (1.0 - zeta_target) + zeta_target * tau) / (
            1.0 - zeta_target
        )
    else:
        raise InvalidInput("calibration must be 'exact' or 'literal'")

    alpha = math.sqrt(sigma_alpha2) * rng.standard_normal(l)
    beta = math.sqrt(sigma_beta2) * rng.standard_normal(d)
    return CausalModel(
        mixing=M,
        alpha=alpha,
        beta=beta,
        sigma_eps2=sigma_eps2,
        sigma_alpha2=sigma_alpha2,
        sigma_beta2=sigma_beta2,
        _svd=(U, s, V_d),
    )


def draw_observations(
    model: CausalModel, n: int, rng: np.random.Generator
) -> ObservationalData:
    """Sample n observations from the structural equations (same z drives x and y)."""
    if n <= model.d:
        raise InvalidInput("need n > d")
    Z = rng.standard_normal((model.l, n))
    X = model.mixing @ Z
    eps = math.sqrt(model.sigma_eps2) * rng.standard_normal(n)
    Y = X.T @ model.beta + Z.T @ model.alpha + eps
    return ObservationalData(X=X, Y=Y)


def ground_truth(model: CausalModel) -> GroundTruth:
    """Exact statistical parameters and confounding strength of a model."""
    U, s, V_d = model.svd_factors()
    # M^+ = V_d diag(1/s) U^T; M^+T alpha = U diag(1/s) V_d^T alpha
    proj_alpha = V_d.T @ model.alpha
    shift = U @ (proj_alpha / s)
    beta_stat = model.beta + shift
    # alpha^T (I - M^+ M) alpha with M^+ M = V_d V_d^T
    resid = float(model.alpha @ model.alpha - proj_alpha @ proj_alpha)
    sigma_stat2 = model.sigma_eps2 + max(resid, 0.0)
    num = float(shift @ shift)
    den = float(model.beta @ model.beta) + num
    zeta = 0.0 if den == 0.0 else num / den
    tau_pop = float(np.mean(1.0 / s**2))
    theta_true = 0.0 if model.sigma_beta2 == 0 else model.sigma_alpha2 / model.sigma_beta2
    return GroundTruth(
        beta_stat=beta_stat,
        sigma_stat2=sigma_stat2,
        zeta=zeta,
        tau_pop=tau_pop,
        theta_true=theta_true,
    )


def statistical_noise_limit_check(model: CausalModel) -> float:
    """sigma_stat2 / d minus its high-dimensional limit (gamma_tilde - 1) sigma_alpha2.

    Test helper; vanishes as d grows.
    """
    gt = ground_truth(model)
    return gt.sigma_stat2 / model.d - (model.gamma_tilde - 1.0) * model.sigma_alpha2
