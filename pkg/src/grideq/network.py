"""RL transmission network model and analytic grid-equivalent truth.

All admittance formulas live in the complex dq coordinates (x_d + j x_q)
with normalized frequency w = omega/omega_b, so a branch with per-unit
resistance r and inductance l has admittance

    y(w) = gamma / (rho + j(w + 1)),   gamma = 1/l,  rho = r/l.

The "+1" is the nominal rotating-frame frequency in per unit. Raw rad/s
appear only at the simulation/spectral boundary.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "PerUnitBase",
    "LineParams",
    "NetworkTopology",
    "EquivalentAdmittanceTruth",
    "build_laplacian",
    "true_equivalent_admittance",
    "small_signal_response",
    "true_equivalent_voltage",
]


@dataclass(frozen=True)
class PerUnitBase:
    """Per-unit base quantities (defaults match a 10 kVA / 380 V / 50 Hz bench).

    ``z_b = v_b**2 / s_b`` is checked for consistency but only flagged:
    published parameter tables routinely list rounded (or amplitude-invariant
    rescaled) bases, and the toolkit itself works purely in per unit.
    """

    s_b: float = 10e3
    omega_b: float = 100.0 * np.pi
    v_b: float = 380.0
    z_b: float = 21.67
    l_b: float = 21.67 / (100.0 * np.pi)
    c_b: float = 1.0 / (21.67 * 100.0 * np.pi)
    consistent: bool = field(init=False, default=False)

    def __post_init__(self):
        for name in ("s_b", "omega_b", "v_b", "z_b", "l_b", "c_b"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"per-unit base {name} must be positive")
        rel = abs(self.z_b - self.v_b**2 / self.s_b) / self.z_b
        object.__setattr__(self, "consistent", rel <= 1e-9)
        if not self.consistent:
            warnings.warn(
                f"per-unit base inconsistency: z_b={self.z_b:.6g} vs "
                f"v_b^2/s_b={self.v_b**2 / self.s_b:.6g} (flagged, not rejected)",
                stacklevel=2,
            )


@dataclass(frozen=True)
class LineParams:
    """Per-unit series parameters of one resistive-inductive line."""

    r: float
    l: float

    def __post_init__(self):
        if self.r <= 0 or self.l <= 0:
            raise ConfigurationError(f"line requires r>0 and l>0, got r={self.r}, l={self.l}")
        if self.rho > 1.0:
            warnings.warn(f"line rho=r/l={self.rho:.3g} > 1; expected rho << 1", stacklevel=2)

    @property
    def gamma(self) -> float:
        return 1.0 / self.l

    @property
    def rho(self) -> float:
        return self.r / self.l


class NetworkTopology:
    """Undirected connected graph of converters joined by RL lines.

    Edges are stored once with i < j; access is symmetric. Construction
    rejects self-loops, duplicate pairs, out-of-range indices, and
    disconnected graphs (a Thevenin equivalent needs a connected grid).
    """

    def __init__(self, n: int, edges: list[tuple[int, int, LineParams]]):
        if n < 1:
            raise ConfigurationError("need at least one converter")
        self.n = n
        self._lines: dict[tuple[int, int], LineParams] = {}
        for i, j, params in edges:
            if i == j:
                raise ConfigurationError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigurationError(f"edge ({i},{j}) outside 0..{n - 1}")
            key = (min(i, j), max(i, j))
            if key in self._lines:
                raise ConfigurationError(f"duplicate edge {key}")
            self._lines[key] = params
        self._check_connected()

    def _check_connected(self):
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in self._lines:
            parent[find(i)] = find(j)
        components: dict[int, list[int]] = {}
        for v in range(self.n):
            components.setdefault(find(v), []).append(v)
        if len(components) > 1:
            parts = ", ".join(str(sorted(c)) for c in components.values())
            raise ConfigurationError(f"graph is disconnected; components: {parts}")

    @property
    def edges(self) -> list[tuple[int, int, LineParams]]:
        return [(i, j, p) for (i, j), p in sorted(self._lines.items())]

    def line(self, i: int, j: int) -> LineParams:
        key = (min(i, j), max(i, j))
        if key not in self._lines:
            raise KeyError(f"no line between {i} and {j}")
        return self._lines[key]

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self._lines:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def truth(self, i: int) -> "EquivalentAdmittanceTruth":
        pairs = [(self.line(i, j).gamma, self.line(i, j).rho) for j in self.neighbors(i)]
        return EquivalentAdmittanceTruth(node=i, gamma_rho=tuple(pairs))


@dataclass(frozen=True)
class EquivalentAdmittanceTruth:
    """Ground-truth (gamma_ij, rho_ij) pairs over the neighbors of one node."""

    node: int
    gamma_rho: tuple[tuple[float, float], ...]

    @property
    def gamma_total(self) -> float:
        return sum(g for g, _ in self.gamma_rho)

    @property
    def homogeneous(self) -> bool:
        rhos = [r for _, r in self.gamma_rho]
        return max(rhos) - min(rhos) <= 1e-12 * max(rhos)


def build_laplacian(topology: NetworkTopology) -> np.ndarray:
    """Weighted graph Laplacian with edge weights gamma_ij = 1/l_ij."""
    n = topology.n
    lap = np.zeros((n, n))
    for i, j, params in topology.edges:
        g = params.gamma
        lap[i, i] += g
        lap[j, j] += g
        lap[i, j] -= g
        lap[j, i] -= g
    return lap


def true_equivalent_admittance(truth: EquivalentAdmittanceTruth, omega) -> complex | np.ndarray:
    """Equivalent grid admittance Y(w) = sum_j gamma_ij / (rho_ij + j(w+1)).

    ``omega`` is the normalized complex-coordinate frequency (omega/omega_b);
    scalar or array. The denominator never vanishes for rho_ij > 0.
    """
    omega = np.asarray(omega, dtype=float)
    y = np.zeros(omega.shape, dtype=complex)
    for g, rho in truth.gamma_rho:
        y += g / (rho + 1j * (omega + 1.0))
    return y if y.shape else complex(y)


def small_signal_response(
    topology: NetworkTopology, dv: np.ndarray, omega: float
) -> np.ndarray:
    """Line-injection currents for a given PCC voltage deviation phasor vector.

    di_i = sum_j gamma_ij (dv_i - dv_j) / (rho_ij + j(omega+1)), omega normalized.
    """
    dv = np.asarray(dv, dtype=complex)
    if dv.shape != (topology.n,):
        raise ValueError(f"expected voltage vector of length {topology.n}, got {dv.shape}")
    di = np.zeros(topology.n, dtype=complex)
    for i, j, params in topology.edges:
        y = params.gamma / (params.rho + 1j * (omega + 1.0))
        flow = y * (dv[i] - dv[j])
        di[i] += flow
        di[j] -= flow
    return di


def true_equivalent_voltage(
    truth: EquivalentAdmittanceTruth, dv_neighbors: np.ndarray, omega: float
) -> complex:
    """Equivalent grid voltage: branch-admittance-weighted neighbor average.

    Heterogeneous form (1/Y_i) sum_j y_ij(w) dv_j; collapses to the plain
    gamma-weighted average when all rho_ij coincide.
    """
    dv_neighbors = np.asarray(dv_neighbors, dtype=complex)
    if dv_neighbors.shape != (len(truth.gamma_rho),):
        raise ValueError(
            f"expected one voltage per neighbor ({len(truth.gamma_rho)}), got {dv_neighbors.shape}"
        )
    y_total = true_equivalent_admittance(truth, omega)
    acc = 0.0 + 0.0j
    for (g, rho), dv in zip(truth.gamma_rho, dv_neighbors):
        acc += g / (rho + 1j * (omega + 1.0)) * dv
    return acc / y_total
