"""Parametric estimation of the equivalent grid admittance.

The IV ratio h' enters a per-bin linear regression in theta = (rho, gamma):

    z(k) = [ -(w+1) Im h'(k) ]   H(k) = [ -Re h'(k)  1 ]
           [  (w+1) Re h'(k) ]          [ -Im h'(k)  0 ]

with w the normalized frequency. Two numerical safeguards from the
reference experiment setup are applied: frequencies are normalized by the
grid base frequency, and each bin's rows are divided by
k_norm = max(1, w). The weighted solve runs over the positive-frequency
estimation grid with per-bin variance sigma(k) = c1 + c2 (1 - W(k)), so
rejected bins stay in the stack but carry negligible weight.

The stored z/H are the k_norm-normalized quantities used by the solver;
``denormalized`` recovers the raw pair, for which z - H theta = -gamma d
holds exactly and which therefore feeds the coupling Kalman filter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .discrimination import FrequencyWeights
from .errors import (ConfigurationError, EstimationImpossible, IllConditioned,
                     SingularEvaluation)
from .network import EquivalentAdmittanceTruth, true_equivalent_admittance
from .spectral import RatioData

__all__ = [
    "WlsConfig",
    "RegressionRow",
    "RegressionData",
    "ThetaEstimate",
    "ErrorStats",
    "build_regression",
    "solve_constrained_wls",
    "admittance_from_theta",
    "estimation_errors",
    "admittance_errors_at",
]


@dataclass(frozen=True)
class WlsConfig:
    """Variance levels and solver limits for the constrained WLS."""

    c1: float = 0.1
    c2: float = 1e20
    tolerance: float = 1e-12
    max_iterations: int = 8

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ConfigurationError("variance levels must be positive")
        if self.c2 / self.c1 < 1e6:
            raise ConfigurationError("c2/c1 must be at least 1e6 to dominate rejected bins")


class RegressionRow(NamedTuple):
    omega: float
    omega_bar: float
    z: np.ndarray
    h_mat: np.ndarray
    sigma_theta: float
    k_norm: float
    weight: int
    valid: bool


@dataclass
class RegressionData:
    """Per-bin regression quantities over the full signed frequency grid."""

    omega: np.ndarray        # rad/s, signed, FFT order
    omega_bar: np.ndarray    # omega / omega_b
    z: np.ndarray            # (n, 2) normalized output
    h_mat: np.ndarray        # (n, 2, 2) normalized regressor
    sigma_theta: np.ndarray  # (n,)
    k_norm: np.ndarray       # (n,)
    weight: np.ndarray       # (n,) uint8
    valid: np.ndarray        # (n,) bool

    def __len__(self) -> int:
        return len(self.omega)

    def row(self, k: int) -> RegressionRow:
        return RegressionRow(
            omega=float(self.omega[k]), omega_bar=float(self.omega_bar[k]),
            z=self.z[k], h_mat=self.h_mat[k],
            sigma_theta=float(self.sigma_theta[k]), k_norm=float(self.k_norm[k]),
            weight=int(self.weight[k]), valid=bool(self.valid[k]),
        )

    def denormalized(self) -> tuple[np.ndarray, np.ndarray]:
        """Raw (z, H) with the k_norm division undone."""
        kn = self.k_norm
        return self.z * kn[:, None], self.h_mat * kn[:, None, None]

    @property
    def estimation_mask(self) -> np.ndarray:
        return self.valid & (self.omega >= 0.0)


@dataclass
class ThetaEstimate:
    """Constrained WLS solution theta = (rho, gamma) with covariance."""

    theta: np.ndarray
    covariance: np.ndarray
    active: np.ndarray
    residual_norm: float
    n_bins_used: int
    condition_number: float

    @property
    def rho(self) -> float:
        return float(self.theta[0])

    @property
    def gamma(self) -> float:
        return float(self.theta[1])


def build_regression(ratio: RatioData, weights: FrequencyWeights, omega_b: float,
                     config: WlsConfig) -> RegressionData:
    """Assemble normalized regression rows from the IV ratio and FD weights."""
    if len(ratio.omega) != len(weights.omega):
        raise ValueError("ratio and weights must share the frequency grid")
    if omega_b <= 0:
        raise ValueError("omega_b must be positive")
    if not (weights.w == 1).any():
        raise EstimationImpossible("frequency discrimination retained no bins")

    n = len(ratio.omega)
    wbar = ratio.omega / omega_b
    re = ratio.h.real
    im = ratio.h.imag
    k_norm = np.maximum(1.0, wbar)
    z = np.stack([-(wbar + 1.0) * im, (wbar + 1.0) * re], axis=1) / k_norm[:, None]
    h_mat = np.zeros((n, 2, 2))
    h_mat[:, 0, 0] = -re
    h_mat[:, 0, 1] = 1.0
    h_mat[:, 1, 0] = -im
    h_mat /= k_norm[:, None, None]
    sigma = config.c1 + config.c2 * (1.0 - weights.w.astype(float))
    return RegressionData(
        omega=ratio.omega.copy(), omega_bar=wbar, z=z, h_mat=h_mat,
        sigma_theta=sigma, k_norm=k_norm, weight=weights.w.copy(),
        valid=ratio.valid.copy(),
    )


def _solve_active_set(normal: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact nonnegative solution of the 2x2 normal equations.

    Enumerates the four active sets and returns the KKT point: at a free
    component the gradient vanishes, at a clamped one it is nonnegative.
    """
    best = None
    for active in ((False, False), (True, False), (False, True), (True, True)):
        free = [k for k in range(2) if not active[k]]
        theta = np.zeros(2)
        if free:
            sub = normal[np.ix_(free, free)]
            theta[free] = np.linalg.solve(sub, rhs[free])
        if np.any(theta < 0.0):
            continue
        grad = normal @ theta - rhs  # half-gradient of the quadratic
        if all(grad[k] >= -1e-9 * (1.0 + abs(rhs[k])) for k in range(2) if active[k]):
            best = (theta, np.array(active))
            break
    if best is None:
        # numerically degenerate KKT check; fall back to full clamp
        best = (np.zeros(2), np.array([True, True]))
    return best


def solve_constrained_wls(rows: RegressionData, config: WlsConfig) -> ThetaEstimate:
    """Minimize sum_k ||z(k) - H(k) theta||^2 / sigma(k) subject to theta >= 0.

    Uses the positive-frequency estimation grid. The covariance is the
    inverse weighted normal matrix restricted to the free subspace;
    components pinned at zero get zero variance and an active flag.
    """
    mask = rows.estimation_mask
    n_used = int(mask.sum())
    if n_used < 2:
        raise EstimationImpossible(f"only {n_used} usable bins on the estimation grid")
    h = rows.h_mat[mask]
    z = rows.z[mask]
    inv_sig = 1.0 / rows.sigma_theta[mask]

    normal = np.einsum("kji,k,kjl->il", h, inv_sig, h)
    rhs = np.einsum("kji,k,kj->i", h, inv_sig, z)
    cond = float(np.linalg.cond(normal))
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditioned(cond)

    theta, active = _solve_active_set(normal, rhs)

    cov = np.zeros((2, 2))
    free = [k for k in range(2) if not active[k]]
    if free:
        cov[np.ix_(free, free)] = np.linalg.inv(normal[np.ix_(free, free)])
    resid = z - np.einsum("kij,j->ki", h, theta)
    residual_norm = float(np.sqrt(np.einsum("ki,k,ki->", resid, inv_sig, resid)))
    return ThetaEstimate(
        theta=theta, covariance=0.5 * (cov + cov.T), active=active,
        residual_norm=residual_norm, n_bins_used=n_used, condition_number=cond,
    )


def admittance_from_theta(theta, omega_bar) -> complex | np.ndarray:
    """Y(w) = gamma / (rho + j(w+1)) for theta = (rho, gamma)."""
    rho, gamma = float(theta[0]), float(theta[1])
    scalar = np.ndim(omega_bar) == 0
    omega_bar = np.atleast_1d(np.asarray(omega_bar, dtype=float))
    denom = rho + 1j * (omega_bar + 1.0)
    if np.any(np.abs(denom) < 1e-12):
        raise SingularEvaluation(f"admittance pole hit at rho={rho}, omega_bar contains -1")
    y = gamma / denom
    return complex(y[0]) if scalar else y


@dataclass(frozen=True)
class ErrorStats:
    mag_mean_db: float
    mag_max_db: float
    phase_mean_deg: float
    phase_max_deg: float


def _wrap_deg(angles: np.ndarray) -> np.ndarray:
    return (angles + 180.0) % 360.0 - 180.0


def admittance_errors_at(theta, truth: EquivalentAdmittanceTruth,
                         omega_bar: np.ndarray) -> ErrorStats:
    """Magnitude (dB) and phase (deg) errors at given normalized frequencies."""
    omega_bar = np.asarray(omega_bar, dtype=float)
    if omega_bar.size == 0:
        raise ValueError("no frequencies to evaluate errors at")
    y_hat = np.atleast_1d(admittance_from_theta(theta, omega_bar))
    y_true = np.atleast_1d(true_equivalent_admittance(truth, omega_bar))
    mag = np.abs(20.0 * np.log10(np.abs(y_hat)) - 20.0 * np.log10(np.abs(y_true)))
    phase = np.abs(_wrap_deg(np.degrees(np.angle(y_hat)) - np.degrees(np.angle(y_true))))
    return ErrorStats(
        mag_mean_db=float(mag.mean()), mag_max_db=float(mag.max()),
        phase_mean_deg=float(phase.mean()), phase_max_deg=float(phase.max()),
    )


def estimation_errors(theta, truth: EquivalentAdmittanceTruth,
                      band: tuple[float, float], n_points: int,
                      omega_b: float = 100.0 * np.pi) -> ErrorStats:
    """Errors over n_points log-spaced frequencies in a rad/s band."""
    lo, hi = band
    if not (0 < lo < hi):
        raise ValueError("band must satisfy 0 < lo < hi")
    omega = np.logspace(np.log10(lo), np.log10(hi), n_points)
    return admittance_errors_at(theta, truth, omega / omega_b)
