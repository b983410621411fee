"""Complex-coordinate spectra, cross-spectral densities and the IV ratio.

The deviation signals are genuinely complex (d + jq), so their FFTs carry
independent information at positive and negative frequencies; no
conjugate symmetry is assumed anywhere. The expectation in the
cross-spectral densities is realized as Welch-style averaging over K
non-overlapping rectangular-windowed segments.

FFT scaling: forward transforms are multiplied by 1/N_seg so bin values
approximate Fourier-series coefficients; with this choice
sum_k S_RR(k) equals the mean squared excitation magnitude (Parseval).
All estimator ratios are scale invariant, so the choice only affects
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationImpossible
from .simulation import SimulationTrace

__all__ = [
    "ComplexDeviationSignals",
    "CrossSpectra",
    "RatioData",
    "to_complex_deviation",
    "estimate_cross_spectra",
    "segment_fft",
    "coherence",
    "iv_ratio",
    "etfe",
]

DEFAULT_GUARD_FLOOR = 1e-6


@dataclass
class ComplexDeviationSignals:
    """Per-PCC complex deviation series over one analysis window."""

    f_s: float
    di: np.ndarray
    dv: np.ndarray
    r: np.ndarray
    dvt: np.ndarray | None = None  # truth diagnostic, simulation only
    i_mean: complex = 0.0
    v_mean: complex = 0.0
    vt_mean: complex = 0.0

    @property
    def n_samples(self) -> int:
        return len(self.r)


@dataclass
class CrossSpectra:
    """Segment-averaged spectral densities on the full signed frequency grid.

    ``omega`` holds signed frequencies (rad/s) in FFT bin order: bins
    0..N/2 map to 0..+Nyquist and the remainder to negative frequencies.
    Positive bins form the estimation grid; negative bins exist for
    time-domain reconstruction.
    """

    omega: np.ndarray
    s_ri: np.ndarray
    s_rv: np.ndarray
    s_rr: np.ndarray
    s_vv: np.ndarray
    n_segments: int
    segment_length: int
    f_s: float
    s_rvt: np.ndarray | None = None  # truth diagnostic

    @property
    def n_bins(self) -> int:
        return len(self.omega)

    @property
    def positive(self) -> np.ndarray:
        return self.omega >= 0.0


@dataclass
class RatioData:
    """Instrumental-variable ratio h'(k) = S_RI(k)/S_RV(k) with validity flags."""

    omega: np.ndarray
    h: np.ndarray
    valid: np.ndarray
    floor_abs: float = field(default=0.0)


def to_complex_deviation(trace: SimulationTrace, pcc: int,
                         window: tuple[float, float]) -> ComplexDeviationSignals:
    """Deviations of i and v from their window means; r passes through."""
    sl = trace.window_slice(window)
    if sl.stop - sl.start < 4:
        raise ValueError("analysis window too short")
    i = trace.i_dq[pcc, sl]
    v = trace.v_dq[pcc, sl]
    r = trace.r_dq[pcc, sl]
    i_mean = complex(i.mean())
    v_mean = complex(v.mean())
    out = ComplexDeviationSignals(
        f_s=trace.sim.f_s, di=i - i_mean, dv=v - v_mean, r=r.copy(),
        i_mean=i_mean, v_mean=v_mean,
    )
    vt = trace.vt_dq[pcc, sl]
    out.vt_mean = complex(vt.mean())
    out.dvt = vt - out.vt_mean
    return out


def _segment_matrix(x: np.ndarray, k: int, n_seg: int) -> np.ndarray:
    """First k*n_seg samples reshaped to (k, n_seg), FFT'd with 1/N scaling."""
    segs = x[: k * n_seg].reshape(k, n_seg)
    return np.fft.fft(segs, axis=1) / n_seg


def segment_grid(n_samples: int, k: int) -> int:
    """Power-of-two segment length after truncation."""
    if k < 1:
        raise ValueError("need at least one segment")
    per = n_samples // k
    if per < 2:
        raise ValueError(f"{n_samples} samples cannot form {k} segments")
    return 1 << (per.bit_length() - 1)


def _omega_grid(n_seg: int, f_s: float) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(n_seg, d=1.0 / f_s)


def estimate_cross_spectra(signals: ComplexDeviationSignals, k: int = 8) -> CrossSpectra:
    """Welch-averaged cross-spectral densities S_RI, S_RV, S_RR, S_VV.

    S_XY(bin) = (1/K) sum over segments of conj(X(bin)) * Y(bin).
    """
    n_seg = segment_grid(signals.n_samples, k)
    rf = _segment_matrix(signals.r, k, n_seg)
    vf = _segment_matrix(signals.dv, k, n_seg)
    it = _segment_matrix(signals.di, k, n_seg)
    rc = rf.conj()
    spectra = CrossSpectra(
        omega=_omega_grid(n_seg, signals.f_s),
        s_ri=(rc * it).mean(axis=0),
        s_rv=(rc * vf).mean(axis=0),
        s_rr=(rc * rf).mean(axis=0).real,
        s_vv=(vf.conj() * vf).mean(axis=0).real,
        n_segments=k,
        segment_length=n_seg,
        f_s=signals.f_s,
    )
    if signals.dvt is not None:
        vtf = _segment_matrix(signals.dvt, k, n_seg)
        spectra.s_rvt = (rc * vtf).mean(axis=0)
    return spectra


def segment_fft(signals: ComplexDeviationSignals, k: int = 8,
                segment: int = -1, window: str = "rect") -> dict[str, np.ndarray]:
    """Single-segment FFTs (same grid and scaling as the averaged spectra).

    Used for time-domain reconstruction and per-bin coupling extraction,
    which need one coherent record rather than an averaged density.
    ``segment`` indexes the K segments. ``window`` may be "hann": the
    slow droop-induced angle wander puts strong content at very low
    frequencies whose rectangular-window skirts otherwise bury the small
    in-band bins; a Hann taper restores the per-bin transfer relations.
    """
    n_seg = segment_grid(signals.n_samples, k)
    idx = range(k)[segment]
    sl = slice(idx * n_seg, (idx + 1) * n_seg)
    if window == "rect":
        taper = None
        scale = float(n_seg)
    elif window == "hann":
        taper = np.hanning(n_seg)
        scale = float(taper.sum())
    else:
        raise ValueError(f"unknown window {window!r}; use 'rect' or 'hann'")

    def tf(x):
        seg = x[sl] if taper is None else x[sl] * taper
        return np.fft.fft(seg) / scale

    out = {
        "omega": _omega_grid(n_seg, signals.f_s),
        "di": tf(signals.di),
        "dv": tf(signals.dv),
        "r": tf(signals.r),
    }
    if signals.dvt is not None:
        out["dvt"] = tf(signals.dvt)
    return out


def coherence(spectra: CrossSpectra) -> np.ndarray:
    """C_RV(k) = |S_RV|^2 / (S_RR * S_VV), clipped to [0, 1].

    Bins with zero auto-power get coherence 0 (signal absent). K = 1
    degenerates to identically 1 wherever both signals are present.
    """
    denom = spectra.s_rr * spectra.s_vv
    c = np.zeros(spectra.n_bins)
    ok = denom > 0.0
    c[ok] = np.abs(spectra.s_rv[ok]) ** 2 / denom[ok]
    return np.clip(c, 0.0, 1.0)


def iv_ratio(spectra: CrossSpectra, floor: float = DEFAULT_GUARD_FLOOR) -> RatioData:
    """h'(k) = S_RI(k)/S_RV(k) where |S_RV| clears the guard floor.

    The floor is relative to the median |S_RV|; bins below it carry an
    invalid flag rather than a silent zero.
    """
    if floor <= 0:
        raise ValueError("guard floor must be positive")
    mag = np.abs(spectra.s_rv)
    floor_abs = floor * np.median(mag)
    valid = mag >= floor_abs
    if not valid.any():
        raise EstimationImpossible("every bin fell below the S_RV guard floor")
    h = np.zeros(spectra.n_bins, dtype=complex)
    h[valid] = spectra.s_ri[valid] / spectra.s_rv[valid]
    return RatioData(omega=spectra.omega.copy(), h=h, valid=valid, floor_abs=floor_abs)


def segment_ratio(signals: ComplexDeviationSignals, k: int = 8, segment: int = -1,
                  floor: float = DEFAULT_GUARD_FLOOR, window: str = "hann") -> RatioData:
    """Raw per-bin ratio di(jw)/dv(jw) of one segment, as RatioData.

    This is the single-record counterpart of the IV ratio: it carries the
    realized per-bin grid coupling of that segment, which is what the
    voltage-reconstruction step must track (the averaged IV ratio only
    retains the locally-correlated part). Guarded on |dv| like iv_ratio.
    Defaults to a Hann taper (see segment_fft).
    """
    seg = segment_fft(signals, k, segment, window=window)
    mag = np.abs(seg["dv"])
    floor_abs = floor * np.median(mag)
    valid = mag >= floor_abs
    if not valid.any():
        raise EstimationImpossible("segment voltage spectrum below guard floor everywhere")
    h = np.zeros(len(mag), dtype=complex)
    h[valid] = seg["di"][valid] / seg["dv"][valid]
    return RatioData(omega=seg["omega"], h=h, valid=valid, floor_abs=floor_abs)


def etfe(signals: ComplexDeviationSignals) -> tuple[np.ndarray, np.ndarray]:
    """Raw empirical transfer function estimate di(jw)/dv(jw), single record.

    Returns (omega, ratio) on the full-record FFT grid (power-of-two
    truncation). Kept as the biased baseline the IV estimate is judged
    against.
    """
    n = 1 << (signals.n_samples.bit_length() - 1)
    di = np.fft.fft(signals.di[:n]) / n
    dv = np.fft.fft(signals.dv[:n]) / n
    omega = _omega_grid(n, signals.f_s)
    ratio = np.full(n, np.nan + 0j)
    ok = np.abs(dv) > 0.0
    ratio[ok] = di[ok] / dv[ok]
    return omega, ratio
