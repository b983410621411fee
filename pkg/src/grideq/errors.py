"""Exception taxonomy shared across the toolkit.

Configuration problems (bad topology, bad ranges, bad files) raise
ConfigurationError; numerical failures during simulation or estimation
raise NumericalError subclasses. Plain argument misuse raises ValueError.
"""


class ConfigurationError(Exception):
    """Invalid configuration: topology, parameter ranges, or config file."""


class NumericalError(Exception):
    """Base class for numerical failures in simulation or estimation."""


class SimulationDiverged(NumericalError):
    """Integration produced a non-finite or out-of-range state."""

    def __init__(self, time: float, detail: str):
        super().__init__(f"simulation diverged at t={time:.6g} s: {detail}")
        self.time = time
        self.detail = detail


class EstimationImpossible(NumericalError):
    """No usable frequency bins remain for estimation."""


class IllConditioned(NumericalError):
    """Normal matrix of the weighted least-squares problem is rank deficient."""

    def __init__(self, cond: float):
        super().__init__(f"ill-conditioned normal matrix (cond={cond:.3e})")
        self.cond = cond


class SingularEvaluation(NumericalError):
    """Transfer-function evaluation hit a pole (zero denominator)."""
