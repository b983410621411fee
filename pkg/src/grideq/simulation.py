"""Time-domain simulation of droop-controlled grid-forming converters.

The electrical network and converter states are integrated in one global
synchronous frame with complex per-unit states (see _kernel); measurements
are recorded at f_s in each converter's local PLL frame, exactly as the
decentralized estimators would see them on hardware.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import ConfigurationError, SimulationDiverged
from .excitation import PrbsConfig, prbs_complex
from .network import NetworkTopology

__all__ = [
    "VscConfig",
    "SimConfig",
    "SimulationTrace",
    "PllState",
    "pll_step",
    "simulate",
    "steady_state_extract",
]

# 50 Hz loop bandwidth, critically damped
DEFAULT_PLL_KP = 2.0 * (2.0 * np.pi * 50.0)
DEFAULT_PLL_KI = (2.0 * np.pi * 50.0) ** 2


@dataclass(frozen=True)
class VscConfig:
    """One grid-forming converter: LC filter, droop laws, PLL, references."""

    r_f: float = 0.015
    l_f: float = 0.04
    c_f: float = 0.0175
    omega_c: float = 2.0 * np.pi * 7.5
    k_omega: float = 2.5e-5
    k_v: float = 2.5e-4
    omega_ref: float = 1.0
    v_ref: float = 1.0
    p_ref: float = 1.0
    q_ref: float = 0.0
    pll_kp: float = DEFAULT_PLL_KP
    pll_ki: float = DEFAULT_PLL_KI
    theta0: float = 0.0

    def __post_init__(self):
        for name in ("r_f", "l_f", "c_f", "omega_c", "k_omega", "k_v",
                     "pll_kp", "pll_ki"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"VSC parameter {name} must be positive")
        if not (0.5 <= self.omega_ref <= 1.5 and 0.5 <= self.v_ref <= 1.5):
            raise ConfigurationError("frequency/voltage references outside [0.5, 1.5] p.u.")
        if abs(self.p_ref) > 1.5 or abs(self.q_ref) > 1.5:
            raise ConfigurationError("power references outside sanity bound |x| <= 1.5 p.u.")


@dataclass(frozen=True)
class SimConfig:
    """Sampling and integration settings."""

    f_s: float = 10e3
    duration: float = 20.4
    oversample: int = 4
    t_discard: float = 1.6

    def __post_init__(self):
        if self.f_s <= 0 or self.duration <= 0:
            raise ConfigurationError("f_s and duration must be positive")
        if self.oversample < 1:
            raise ConfigurationError("oversample must be >= 1")
        n = self.duration * self.f_s
        if abs(n - round(n)) > 1e-6:
            raise ConfigurationError("duration * f_s must be an integer sample count")
        if not (0.0 <= self.t_discard < self.duration):
            raise ConfigurationError("t_discard must lie in [0, duration)")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.f_s))


@dataclass
class SimulationTrace:
    """Sampled measurements plus true-frame diagnostics.

    i_dq, v_dq, vt_dq are complex (d + jq) series in each converter's local
    measurement frame; r_dq is the injected excitation in that same frame.
    v_global, delta, delta_hat, i_lines and energy are diagnostics in the
    global synchronous frame, stored for validation only.
    """

    topology: NetworkTopology
    sim: SimConfig
    t: np.ndarray
    i_dq: np.ndarray
    v_dq: np.ndarray
    r_dq: np.ndarray
    vt_dq: np.ndarray
    v_global: np.ndarray
    delta: np.ndarray
    delta_hat: np.ndarray
    i_lines: np.ndarray
    energy: np.ndarray

    @property
    def n(self) -> int:
        return self.i_dq.shape[0]

    @property
    def n_samples(self) -> int:
        return self.i_dq.shape[1]

    def channel(self, kind: str, pcc: int) -> np.ndarray:
        series = {"i": self.i_dq, "v": self.v_dq, "r": self.r_dq, "vt": self.vt_dq}
        if kind not in series:
            raise ValueError(f"unknown channel kind {kind!r}; one of {sorted(series)}")
        return series[kind][pcc]

    def window_slice(self, window: tuple[float, float]) -> slice:
        t0, t1 = window
        if t1 <= t0:
            raise ValueError(f"empty window [{t0}, {t1}]")
        if t0 < self.sim.t_discard - 1e-12 or t1 > self.sim.duration + 1e-12:
            raise ValueError(
                f"window [{t0}, {t1}] outside [t_discard={self.sim.t_discard}, "
                f"duration={self.sim.duration}]"
            )
        k0 = int(np.ceil(t0 * self.sim.f_s - 1e-9))
        k1 = int(np.floor(t1 * self.sim.f_s + 1e-9))
        if k1 <= k0:
            raise ValueError(f"window [{t0}, {t1}] contains no samples")
        return slice(k0, min(k1, self.n_samples))


@dataclass(frozen=True)
class PllState:
    delta_hat: float = 0.0
    x: float = 0.0


def pll_step(v_dq: complex, state: PllState, dt: float,
             kp: float = DEFAULT_PLL_KP, ki: float = DEFAULT_PLL_KI) -> PllState:
    """One discrete SRF-PLL update on a source-frame voltage sample.

    Rotates v_dq into the estimated frame and drives its q-component to
    zero through PI feedback on frequency.
    """
    if kp <= 0 or ki <= 0:
        raise ConfigurationError("PLL gains must be positive")
    v_est = v_dq * np.exp(-1j * state.delta_hat)
    e_q = v_est.imag
    x = state.x + ki * e_q * dt
    delta_hat = state.delta_hat + (kp * e_q + x) * dt
    return PllState(delta_hat=delta_hat, x=x)


def _excitation_matrix(prbs: list[PrbsConfig] | None, n: int, n_samples: int,
                       excitation: np.ndarray | None) -> np.ndarray:
    if excitation is not None:
        exc = np.asarray(excitation, dtype=complex)
        if exc.shape != (n, n_samples):
            raise ValueError(f"excitation must have shape ({n}, {n_samples}), got {exc.shape}")
        return np.ascontiguousarray(exc)
    exc = np.zeros((n, n_samples), dtype=complex)
    if prbs is not None:
        if len(prbs) != n:
            raise ValueError(f"need one PrbsConfig per converter ({n}), got {len(prbs)}")
        for i, cfg in enumerate(prbs):
            exc[i] = prbs_complex(cfg, n_samples)
    return exc


def simulate(topology: NetworkTopology, vscs: list[VscConfig],
             prbs: list[PrbsConfig] | None, sim: SimConfig, *,
             omega_b: float = 100.0 * np.pi,
             excitation: np.ndarray | None = None,
             ideal_pll: bool = False) -> SimulationTrace:
    """Run the closed-loop simulation and return the sampled trace.

    ``excitation`` overrides the PRBS generators with an explicit complex
    (n, n_samples) reference injection (used e.g. for single-tone probing);
    ``ideal_pll`` frames the measurements with the true converter angle.
    """
    n = topology.n
    if len(vscs) != n:
        raise ValueError(f"need one VscConfig per converter ({n}), got {len(vscs)}")
    n_samples = sim.n_samples
    exc = _excitation_matrix(prbs, n, n_samples, excitation)

    edges = topology.edges
    edge_idx = np.array([[i, j] for i, j, _ in edges], dtype=np.int64).reshape(-1, 2)
    gam_e = np.array([p.gamma for _, _, p in edges])
    r_e = np.array([p.r for _, _, p in edges])
    l_e = np.array([p.l for _, _, p in edges])
    gam_node = np.zeros(n)
    for i, j, p in edges:
        gam_node[i] += p.gamma
        gam_node[j] += p.gamma

    def arr(name):
        return np.array([getattr(v, name) for v in vscs], dtype=float)

    status, k_fail, i_loc, v_loc, vt_loc, v_glob, delta, dhat, i_lines, energy = (
        _kernel.simulate_kernel(
            n, edge_idx, gam_e, r_e, l_e, gam_node,
            arr("r_f"), arr("l_f"), arr("c_f"), arr("omega_c"),
            arr("k_omega"), arr("k_v"), arr("omega_ref"), arr("v_ref"),
            arr("p_ref"), arr("q_ref"), arr("pll_kp"), arr("pll_ki"),
            arr("theta0"), omega_b, sim.f_s, sim.oversample, exc,
            ideal_pll,
        )
    )
    if status != _kernel.STATUS_OK:
        what = "non-finite state" if status == _kernel.STATUS_NONFINITE else \
            f"state magnitude exceeded {_kernel.STATE_LIMIT:g} p.u."
        raise SimulationDiverged(k_fail / sim.f_s, what)

    t = np.arange(n_samples) / sim.f_s
    return SimulationTrace(
        topology=topology, sim=sim, t=t,
        i_dq=i_loc, v_dq=v_loc, r_dq=exc, vt_dq=vt_loc,
        v_global=v_glob, delta=delta, delta_hat=dhat,
        i_lines=i_lines, energy=energy,
    )


def steady_state_extract(trace: SimulationTrace, channel: tuple[str, int],
                         window: tuple[float, float]) -> complex:
    """Temporal mean of one complex channel over a steady-state window."""
    kind, pcc = channel
    sl = trace.window_slice(window)
    return complex(np.mean(trace.channel(kind, pcc)[sl]))
