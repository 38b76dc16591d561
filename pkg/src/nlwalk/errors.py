"""Exception hierarchy shared by all modules."""


class NlwalkError(Exception):
    """Base class for package errors."""


class ConfigError(NlwalkError):
    """Invalid run configuration (CLI exit code 2)."""


class ModelConditionError(NlwalkError):
    """A requested model condition does not hold (CLI exit code 3)."""


class NoFixedPoint(ModelConditionError):
    """C_lambda != C_mu: the system has no fixed points."""


class NotMeanReverting(NoFixedPoint):
    """The (s, d) form of the equations requires C_lambda == C_mu."""


class NumericalError(NlwalkError):
    """A computation left the representable or stable range (CLI exit code 4)."""


class InvalidProfile(NlwalkError):
    """A beta profile stores or produces a non-positive value."""


class RateOverflow(NumericalError):
    """Jump-rate exponent outside the representable range; the window is
    too wide for the current (L, M)."""


class NormOverflow(NumericalError):
    """Weighted-norm accumulation overflowed."""


class WindowTooNarrow(NlwalkError):
    """The window cannot hold the requested measure at tolerance."""


class StepSizeUnderflow(NumericalError):
    """The integrator could not proceed at a stable/accurate step size."""


class PositivityLost(NumericalError):
    """The integrated measure developed negative mass beyond tolerance."""


class UniformizationOverflow(NumericalError):
    """Dominating rate times substep length too large for uniformization."""


class NonConstantPath(NlwalkError):
    """Dyson evaluation needs a constant (L, M) path on the interval."""


class DominatingRateOverflow(NumericalError):
    """Thinning bound too large to sample against."""


class StepTooLarge(NlwalkError):
    """Particle step violates dt * max_rate < 0.1."""


class CNotOne(NlwalkError):
    """Certified Lyapunov evaluation requested with c != 1."""
