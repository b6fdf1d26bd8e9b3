"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`ChangepointError`, so callers (the CLI in particular) can separate
modelling/numeric failures from programming errors.
"""


class ChangepointError(Exception):
    """Base class for all package errors."""


class NonStationary(ChangepointError, ValueError):
    def __init__(self, root_moduli):
        self.root_moduli = tuple(float(r) for r in root_moduli)
        moduli = ", ".join(f"{r:.6g}" for r in self.root_moduli)
        super().__init__(
            f"AR polynomial has roots on or inside the unit circle (moduli: {moduli})"
        )


class InvalidSigma(ChangepointError, ValueError):
    pass


class TruncationFailure(ChangepointError, ArithmeticError):
    pass


class NotPositiveDefinite(ChangepointError, ArithmeticError):
    pass


class DimensionMismatch(ChangepointError, ValueError):
    pass


class BetaNotOnGrid(ChangepointError, ValueError):
    pass


class DegenerateMA(ChangepointError, ValueError):
    pass


class OutsideDomain(ChangepointError, ArithmeticError):
    """The moment generating function is infinite at the requested theta."""


class NoMaximizer(ChangepointError, ArithmeticError):
    """The Legendre objective keeps increasing up to the edge of its domain."""


class InvalidAlpha(ChangepointError, ValueError):
    pass


class EqualVariances(ChangepointError, ValueError):
    pass


class UnitScale(ChangepointError, ValueError):
    pass


class BracketingFailure(ChangepointError, ArithmeticError):
    pass


class ConfigMismatch(ChangepointError, ValueError):
    pass


class SeriesTooShort(ChangepointError, ValueError):
    pass
