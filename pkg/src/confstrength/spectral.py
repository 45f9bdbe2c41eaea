"""Eigenspectra and Stieltjes-transform arithmetic.

Everything downstream (the estimators, the experiment harness) works on the
spectrum of a Gram matrix rather than the matrix itself: the covariance
matrix (1/n) X X^T and the kernel matrix (1/n) X^T X share their nonzero
eigenvalues, so a single symmetric eigendecomposition serves both views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NoSolution, SingularPoint

__all__ = [
    "Spectrum",
    "spectrum_of_gram",
    "stieltjes",
    "solve_eta",
    "eta_derivative",
    "min_norm_regress",
    "rank_tolerance",
]


def rank_tolerance(d: int, n: int, lam_max: float) -> float:
    """Conventional numerical-rank cutoff: max(d, n) * eps * largest eigenvalue."""
    return max(d, n) * np.finfo(float).eps * max(lam_max, 0.0)


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalue multiset of a PSD matrix, normalized by ``size``.

    ``eigenvalues`` may be shorter than ``size``; the missing mass is an
    implicit atom at zero with weight (size - len(eigenvalues)) / size.
    Eigenvalues below the rank tolerance are stored as exact zeros.
    """

    eigenvalues: np.ndarray
    size: int

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if not np.all(np.isfinite(ev)):
            raise InvalidInput("spectrum contains non-finite eigenvalues")
        if ev.ndim != 1 or len(ev) > self.size or self.size < 1:
            raise InvalidInput("eigenvalue list longer than ambient size")
        if np.any(ev < 0):
            # PSD spectra only; tiny negative round-off is clamped upstream.
            raise InvalidInput("negative eigenvalue in a PSD spectrum")
        object.__setattr__(self, "eigenvalues", np.sort(ev))

    @property
    def n_implicit_zeros(self) -> int:
        return self.size - len(self.eigenvalues)

    @property
    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > 0]

    def has_zero_mass(self) -> bool:
        return self.n_implicit_zeros > 0 or np.any(self.eigenvalues == 0)


def spectrum_of_gram(X: np.ndarray, scale: float, orient: str = "cov") -> Spectrum:
    """Spectrum of scale * X X^T (orient="cov", size d) or scale * X^T X
    (orient="kernel", size n) for a d x n matrix X.

    Both orientations share the nonzero eigenvalues, so only the smaller Gram
    matrix is factorized and the other view is padded with implicit zeros.
    """
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        raise InvalidInput("empty matrix")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("non-finite entries in X")
    if scale <= 0:
        raise InvalidInput("scale must be positive")
    if orient not in ("cov", "kernel"):
        raise InvalidInput("orient must be 'cov' or 'kernel'")
    d, n = X.shape
    G = scale * (X @ X.T) if d <= n else scale * (X.T @ X)
    G = 0.5 * (G + G.T)
    ev = np.linalg.eigvalsh(G)
    tol = rank_tolerance(d, n, ev[-1] if len(ev) else 0.0)
    ev = np.where(ev < tol, 0.0, ev)
    size = d if orient == "cov" else n
    if len(ev) > size:
        # the larger Gram matrix carries |n - d| structural zeros
        ev = ev[len(ev) - size:]
    return Spectrum(eigenvalues=ev, size=size)


def kernel_spectrum(cov_spec: Spectrum, n: int) -> Spectrum:
    """Kernel-side view of a covariance spectrum: same nonzero eigenvalues, size n."""
    return Spectrum(eigenvalues=cov_spec.eigenvalues, size=n)


def stieltjes(spec: Spectrum, point: float, order: int = 1) -> float:
    """Stieltjes transform of the empirical spectral measure at a real point.

    order=1: (1/size) sum 1/(lambda_i - point); order=2 its derivative in the
    point, (1/size) sum 1/(lambda_i - point)^2. Implicit zeros are counted.
    """
    if order not in (1, 2):
        raise InvalidInput("order must be 1 or 2")
    ev = spec.eigenvalues
    diff = ev - point
    if np.any(diff == 0.0) or (spec.n_implicit_zeros > 0 and point == 0.0):
        raise SingularPoint(f"evaluation at eigenvalue {point}")
    terms = 1.0 / diff
    if order == 2:
        terms = terms * terms
    total = terms.sum()
    if spec.n_implicit_zeros:
        z = -1.0 / point if order == 1 else 1.0 / point**2
        total += spec.n_implicit_zeros * z
    return float(total / spec.size)


def solve_eta(kernel_spec: Spectrum, theta: float) -> float:
    """Solve m~(eta) = 1/theta for the unique eta < 0.

    m~ is the kernel-spectrum Stieltjes transform; it is strictly increasing
    on the negative reals, tends to 0 at -inf, and (when the spectrum carries
    zero mass) diverges to +inf at 0^-, so the solution exists and is unique.
    """
    if theta <= 0:
        raise InvalidInput("theta must be positive")
    target = 1.0 / theta
    # sup of m~ on R^- is the limit at 0^-; without zero mass it is finite.
    if not kernel_spec.has_zero_mass():
        ev = kernel_spec.nonzero
        sup = float(np.sum(1.0 / ev)) / kernel_spec.size
        if target >= sup:
            raise NoSolution("1/theta above the supremum of m~ on R^-")

    lam_max = kernel_spec.eigenvalues[-1] if len(kernel_spec.eigenvalues) else 1.0
    hi = -1e-12
    lo = -10.0 * theta * (lam_max + 1.0)
    f = lambda eta: stieltjes(kernel_spec, eta, order=1) - target
    while f(lo) > 0:
        lo *= 4.0
        if lo < -1e18:
            raise NoSolution("failed to bracket eta")
    while f(hi) < 0:
        hi *= 0.25
        if hi > -1e-300:
            raise NoSolution("failed to bracket eta near zero")

    # bisection with Newton polish; m~ is monotone but stiff near 0^-
    a, b = lo, hi
    eta = 0.5 * (a + b)
    for _ in range(200):
        fe = f(eta)
        if abs(fe) <= 1e-12 * target:
            break
        if fe < 0:
            a = eta
        else:
            b = eta
        step = fe / stieltjes(kernel_spec, eta, order=2)
        newton = eta - step
        eta = newton if a < newton < b else 0.5 * (a + b)
    if abs(f(eta)) > 1e-10 * target:
        raise NoSolution("eta solver failed to reach tolerance")
    return float(eta)


def eta_derivative(kernel_spec: Spectrum, theta: float, eta: float) -> float:
    """eta' = 1 / (theta^2 m~'(eta)), the sensitivity used by the derivative trick.

    Note d(eta)/d(theta) = -eta' since m~(eta(theta)) = 1/theta.
    """
    m2 = stieltjes(kernel_spec, eta, order=2)
    return float(1.0 / (theta**2 * m2))


def min_norm_regress(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares coefficients of Y on the columns of X^T.

    Equals ((1/n) X X^T)^+ (1/n) X Y with the conventional rank cutoff.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InvalidInput("non-finite inputs")
    if X.shape[1] != Y.shape[0]:
        raise InvalidInput("X columns must match len(Y)")
    d, n = X.shape
    beta, *_ = np.linalg.lstsq(X.T, Y, rcond=max(d, n) * np.finfo(float).eps)
    return beta
