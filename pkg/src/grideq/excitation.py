"""Pseudo-random binary excitation for decentralized identification.

Each converter owns an independently synthesized PRBS so that all
excitations are mutually orthogonal without any coordination: distinct
seeds select distinct phases of a long maximal-length sequence, whose
pairwise correlation over any practical window is at white-noise level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import max_len_seq

from .errors import ConfigurationError

__all__ = ["PrbsConfig", "prbs_generate", "prbs_complex"]

_SUPPORTED_NBITS = set(range(2, 33))  # scipy's primitive-polynomial table


@dataclass(frozen=True)
class PrbsConfig:
    """One converter's excitation: two-level sequence injected on d and/or q.

    ``chip_period`` is in measurement samples; ``register_length`` selects the
    LFSR size (period 2**register_length - 1 chips). ``channels`` names the
    modulation-reference entries receiving excitation; each active channel
    gets its own stream derived from ``seed``.
    """

    seed: int
    amplitude: float = 1e-3
    chip_period: int = 1
    register_length: int = 20
    channels: tuple[str, ...] = ("d", "q")

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ConfigurationError("PRBS amplitude must be positive")
        if self.chip_period < 1:
            raise ConfigurationError("chip_period must be >= 1 sample")
        if self.register_length not in _SUPPORTED_NBITS:
            raise ConfigurationError(
                f"no maximal-length tap set for register_length={self.register_length}; "
                f"supported: 2..32"
            )
        bad = set(self.channels) - {"d", "q"}
        if bad:
            raise ConfigurationError(f"unknown excitation channels: {sorted(bad)}")


def _lfsr_state(seed: int, stream: int, nbits: int) -> np.ndarray:
    """Nonzero initial register fill derived deterministically from the seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))
    state = rng.integers(0, 2, size=nbits, dtype=np.int8)
    while not state.any():
        state = rng.integers(0, 2, size=nbits, dtype=np.int8)
    return state


def prbs_generate(config: PrbsConfig, n_samples: int, stream: int = 0) -> np.ndarray:
    """Two-level +/-amplitude series for one LFSR stream, chip-held.

    Deterministic given (seed, stream). The LFSR wraps around its natural
    period, so any n_samples is valid.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    n_chips = -(-n_samples // config.chip_period)
    state = _lfsr_state(config.seed, stream, config.register_length)
    bits, _ = max_len_seq(config.register_length, state=state, length=n_chips)
    chips = config.amplitude * (2.0 * bits - 1.0)
    return np.repeat(chips, config.chip_period)[:n_samples]


def prbs_complex(config: PrbsConfig, n_samples: int) -> np.ndarray:
    """Complex d + jq excitation with independent streams per active channel."""
    r = np.zeros(n_samples, dtype=complex)
    if "d" in config.channels:
        r += prbs_generate(config, n_samples, stream=0)
    if "q" in config.channels:
        r += 1j * prbs_generate(config, n_samples, stream=1)
    return r
