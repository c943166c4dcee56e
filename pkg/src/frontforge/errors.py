"""Exception types shared across the package."""


class FrontforgeError(Exception):
    """Base class for all package-specific errors."""


class NonPositiveRadius(FrontforgeError):
    pass


class InvalidMeasure(FrontforgeError):
    """Descriptor violates the jump-measure admissibility conditions."""


class OutOfBand(FrontforgeError):
    """Reaction term evaluated outside the admitted state band."""


class BadInterval(FrontforgeError):
    pass


class ClassViolation(FrontforgeError):
    """Sampled signs contradict the declared reaction class."""


class WrongClass(FrontforgeError):
    pass


class GridTooCoarse(FrontforgeError):
    """Quadrature unreliable for this kernel at the current spacing."""


class UnboundedSupport(FrontforgeError):
    pass


class DivergentMoment(FrontforgeError):
    """A computation requires a moment that diverges for this measure."""


class StageFailed(FrontforgeError):
    """A continuation stage did not converge; carries the partial report."""

    def __init__(self, stage_index, report):
        super().__init__(f"continuation stage {stage_index} failed")
        self.stage_index = stage_index
        self.report = report


class NotMonotoneLadder(FrontforgeError):
    """Cutoff-ladder speeds decreased beyond tolerance."""

    def __init__(self, n_lo, n_hi, c_lo, c_hi):
        super().__init__(
            f"ladder speeds not monotone: c[n={n_lo}]={c_lo!r} > c[n={n_hi}]={c_hi!r}"
        )
        self.pair = (n_lo, n_hi)


class StabilityViolation(FrontforgeError):
    pass


class OvershootDetected(FrontforgeError):
    pass


class LevelNotAttained(FrontforgeError):
    pass


class TooFewSamples(FrontforgeError):
    pass


class BadParameters(FrontforgeError):
    pass


class WindowExceeded(FrontforgeError):
    """A level set left the trusted part of the computational window."""


class TailTooHeavy(FrontforgeError):
    """No admissible shifted equilibrium at this restriction radius."""


class NoBracket(FrontforgeError):
    pass


class ConfigError(FrontforgeError):
    pass
