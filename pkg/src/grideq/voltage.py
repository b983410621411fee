"""Non-parametric equivalent grid voltage estimation.

After the parametric step, the residual of the admittance regression at
each bin carries the grid coupling: z(k) - H(k) theta = -gamma d(k) /
k_norm(k), where d(k) stacks the real and imaginary parts of the coupling
ratio vt(jw)/v(jw) and k_norm is the per-bin normalization divisor of the
regression rows. A random-walk Kalman filter swept along the frequency
axis (ascending |w|, covering negative bins too) estimates d(k) with the
per-bin measurement matrix -gamma/k_norm * I2: the sign matches the
regression identity so the reconstruction comes out with the correct
polarity, and the 1/k_norm factor makes the filter increasingly sceptical
of bins far above the base frequency, where the raw spectral ratios are
noise-dominated.

Multiplying the local voltage spectrum by the estimated coupling and
inverting the FFT reconstructs the equivalent voltage; the DC value is
recovered separately from the steady-state phasors through the Thevenin
relation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError, SingularEvaluation
from .estimation import RegressionData, ThetaEstimate, admittance_from_theta

__all__ = [
    "KfConfig",
    "CouplingEstimate",
    "EquivalentVoltage",
    "residual_sequence",
    "kf_run",
    "reconstruct_freq",
    "dc_value",
    "reconstruct_time",
]


@dataclass(frozen=True)
class KfConfig:
    """Random-walk process noise, initial state, and base measurement variance."""

    sigma_q: float = 1e-2
    d0: tuple[float, float] = (0.0, 0.0)
    p0: float = 1e3
    c1: float = 0.1

    def __post_init__(self):
        if self.sigma_q < 0:
            raise ConfigurationError("sigma_q must be nonnegative")
        if self.p0 <= 0:
            raise ConfigurationError("initial covariance must be positive definite")
        if self.c1 <= 0:
            raise ConfigurationError("base measurement variance c1 must be positive")


@dataclass
class CouplingEstimate:
    """Per-bin coupling state (Re, Im of vt/v) with posterior covariances."""

    omega: np.ndarray
    d: np.ndarray     # (n, 2)
    p: np.ndarray     # (n, 2, 2)
    updated: np.ndarray  # bool; False where the bin was predict-only

    @property
    def h_tilde(self) -> np.ndarray:
        return self.d[:, 0] + 1j * self.d[:, 1]


@dataclass
class EquivalentVoltage:
    """Frequency- and time-domain reconstruction of the equivalent voltage."""

    omega: np.ndarray
    dvt_hat: np.ndarray
    v_ss: complex
    vt_d: np.ndarray
    vt_q: np.ndarray


def residual_sequence(rows: RegressionData, theta: ThetaEstimate,
                      c1: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Regression residuals z_tilde(k) and their covariances R_d(k).

    z_tilde(k) = z(k) - H(k) theta_hat on the normalized rows, so
    z_tilde = -gamma d / k_norm at the true parameters (exactly -gamma d
    wherever k_norm = 1). R_d(k) = c1 I + H(k) Sigma H(k)^T, symmetrized;
    entries at ratio-invalid bins are NaN.
    """
    z_tilde = rows.z - np.einsum("kij,j->ki", rows.h_mat, theta.theta)
    hsh = np.einsum("kij,jl,kml->kim", rows.h_mat, theta.covariance, rows.h_mat)
    r_d = c1 * np.eye(2)[None, :, :] + 0.5 * (hsh + np.transpose(hsh, (0, 2, 1)))
    bad = ~rows.valid
    z_tilde[bad] = np.nan
    r_d[bad] = np.nan
    return z_tilde, r_d


def kf_run(z_tilde: np.ndarray, r_d: np.ndarray, gamma_hat: float,
           config: KfConfig, omega: np.ndarray | None = None,
           valid: np.ndarray | None = None,
           k_norm: np.ndarray | None = None) -> CouplingEstimate:
    """Random-walk Kalman filter along the frequency axis.

    Bins are processed in ascending |omega| (identity order when omega is
    omitted); results are returned in the input bin order. The per-bin
    measurement matrix is -gamma_hat/k_norm(k) * I2 (identity k_norm when
    omitted). Invalid bins are predict-only: the state carries over while
    the covariance grows by Q.
    """
    if gamma_hat <= 0:
        raise ValueError("gamma_hat must be positive for the coupling filter")
    n = len(z_tilde)
    if omega is None:
        omega = np.arange(n, dtype=float)
    if valid is None:
        valid = np.ones(n, dtype=bool)
    if k_norm is None:
        k_norm = np.ones(n)
    order = np.argsort(np.abs(omega), kind="stable")

    q = config.sigma_q * np.eye(2)
    eye = np.eye(2)
    d = np.array(config.d0, dtype=float)
    p = config.p0 * np.eye(2)

    d_out = np.zeros((n, 2))
    p_out = np.zeros((n, 2, 2))
    updated = np.zeros(n, dtype=bool)
    for k in order:
        p_pr = p + q
        if valid[k]:
            r = 0.5 * (r_d[k] + r_d[k].T)
            if not np.all(np.isfinite(r)) or np.any(np.linalg.eigvalsh(r) <= 0.0):
                raise NumericalError(f"measurement covariance not positive definite at bin {k}")
            m = -gamma_hat / k_norm[k]
            s = r + m * m * p_pr
            gain = m * p_pr @ np.linalg.inv(s)
            d = d + gain @ (z_tilde[k] - m * d)
            a = eye - m * gain
            p = a @ p_pr @ a.T + gain @ r @ gain.T  # Joseph form keeps P PSD
            updated[k] = True
        else:
            p = p_pr
        p = 0.5 * (p + p.T)
        d_out[k] = d
        p_out[k] = p
    return CouplingEstimate(omega=np.asarray(omega, dtype=float).copy(),
                            d=d_out, p=p_out, updated=updated)


def reconstruct_freq(coupling: CouplingEstimate, dv_bins: np.ndarray) -> np.ndarray:
    """Equivalent-voltage spectrum: dvt_hat(k) = dv(k) * (d1(k) + j d2(k))."""
    dv_bins = np.asarray(dv_bins, dtype=complex)
    if dv_bins.shape != (len(coupling.d),):
        raise ValueError("voltage bins do not match the coupling estimate grid")
    return dv_bins * coupling.h_tilde


def dc_value(theta: ThetaEstimate | np.ndarray, i0: complex, v0: complex) -> complex:
    """Steady-state equivalent voltage from the DC Thevenin relation.

    Inverts i = Y(j0) (v - vt) at zero frequency using the steady-state
    phasors (temporal means): vt_ss = v0 - i0 / Y(j0).
    """
    vec = theta.theta if isinstance(theta, ThetaEstimate) else np.asarray(theta)
    y0 = admittance_from_theta(vec, 0.0)
    if abs(y0) < 1e-9:
        raise SingularEvaluation("estimated admittance vanishes at DC")
    return complex(v0 - i0 / y0)


def reconstruct_time(dvt_bins: np.ndarray, v_ss: complex) -> tuple[np.ndarray, np.ndarray]:
    """Inverse FFT of the reconstructed spectrum plus the DC value.

    Expects the full signed-bin set of one reconstruction segment (FFT
    order, 1/N forward scaling). The real part of the resulting complex
    series is the d coordinate, the imaginary part the q coordinate.
    """
    dvt_bins = np.asarray(dvt_bins, dtype=complex)
    n = len(dvt_bins)
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError("expected the complete power-of-two bin set of one segment")
    bins = dvt_bins.copy()
    bins[0] += v_ss
    series = np.fft.ifft(bins) * n
    if not (0.5 <= abs(v_ss) <= 1.5):
        warnings.warn(f"|v_ss|={abs(v_ss):.3g} p.u. outside the healthy range [0.5, 1.5]",
                      stacklevel=2)
    return series.real, series.imag
