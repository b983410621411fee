"""Per-bin frequency discrimination for parameter estimation.

Classifies every frequency bin as usable (weight 1) or grid-dominated /
corrupted (weight 0) through three criteria, evaluated in a fixed order:

  (A) coherence between local excitation and PCC voltage below epsilon,
  (B) |omega| outside the band [omega_a, omega_b_cut],
  (C) passivity: Re{h'} < 0 cannot come from an RL grid equivalent.

Bins whose IV ratio is invalid (guard floor) are rejected before (C),
since (C) is not evaluable there. The recorded reason is the first
failing criterion; the weight itself is order independent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .spectral import CrossSpectra, RatioData, coherence

__all__ = ["FdConfig", "FrequencyWeights", "discriminate",
           "REASON_NONE", "REASON_COHERENCE", "REASON_BANDPASS",
           "REASON_INVALID_RATIO", "REASON_PASSIVITY"]

REASON_NONE = "none"
REASON_COHERENCE = "coherence"
REASON_BANDPASS = "bandpass"
REASON_PASSIVITY = "passivity"
REASON_INVALID_RATIO = "invalid-ratio"

_REASON_CODES = {
    0: REASON_NONE,
    1: REASON_COHERENCE,
    2: REASON_BANDPASS,
    3: REASON_INVALID_RATIO,
    4: REASON_PASSIVITY,
}


@dataclass(frozen=True)
class FdConfig:
    """Coherence threshold and band-pass cut-offs (rad/s)."""

    epsilon: float = 0.05
    omega_a: float = 150.0
    omega_b_cut: float = 3000.0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigurationError("epsilon must lie in (0, 1)")
        if not (0.0 < self.omega_a < self.omega_b_cut):
            raise ConfigurationError("need 0 < omega_a < omega_b_cut")

    def validate_nyquist(self, f_s: float):
        if self.omega_b_cut >= np.pi * f_s:
            raise ConfigurationError(
                f"omega_b_cut={self.omega_b_cut:g} rad/s exceeds Nyquist "
                f"pi*f_s={np.pi * f_s:g}"
            )


@dataclass
class FrequencyWeights:
    """Binary weights over bins plus the first-failing rejection reason."""

    omega: np.ndarray
    w: np.ndarray          # uint8, 0 or 1
    reason_code: np.ndarray

    @property
    def reasons(self) -> list[str]:
        return [_REASON_CODES[int(c)] for c in self.reason_code]

    @property
    def n_retained(self) -> int:
        return int(self.w.sum())

    def reason_counts(self) -> dict[str, int]:
        out = {}
        for code, name in _REASON_CODES.items():
            cnt = int(np.count_nonzero(self.reason_code == code))
            if cnt:
                out[name] = cnt
        return out


def discriminate(spectra: CrossSpectra, ratio: RatioData, config: FdConfig) -> FrequencyWeights:
    """Apply the three rejection criteria to every bin of the spectra."""
    if spectra.n_bins != len(ratio.omega) or not np.array_equal(spectra.omega, ratio.omega):
        raise ValueError("spectra and ratio must share the frequency grid")
    config.validate_nyquist(spectra.f_s)

    c_rv = coherence(spectra)
    n = spectra.n_bins
    w = np.ones(n, dtype=np.uint8)
    reason = np.zeros(n, dtype=np.uint8)

    fail_a = c_rv < config.epsilon
    fail_b = (np.abs(spectra.omega) < config.omega_a) | (np.abs(spectra.omega) > config.omega_b_cut)
    fail_inv = ~ratio.valid
    fail_c = ratio.h.real < 0.0

    for mask, code in ((fail_a, 1), (fail_b, 2), (fail_inv, 3), (fail_c, 4)):
        fresh = mask & (w == 1)
        w[fresh] = 0
        reason[fresh] = code

    if not w.any():
        warnings.warn("frequency discrimination rejected every bin", stacklevel=2)
    return FrequencyWeights(omega=spectra.omega.copy(), w=w, reason_code=reason)
