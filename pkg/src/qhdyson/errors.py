"""Exception hierarchy shared by every module."""


class QHError(Exception):
    """Base class for all errors raised by qhdyson."""


class NumericalBreakdown(QHError):
    """A computation left the regime where its result is meaningful."""


class NotHermitian(QHError):
    pass


class NotPositiveDefinite(QHError):
    pass


class NoConvergence(NumericalBreakdown):
    pass


class Overflow(NumericalBreakdown):
    pass


class SingularEta(QHError):
    pass


class PositivityLost(NumericalBreakdown):
    def __init__(self, t, min_eig):
        super().__init__(f"metric lost positivity at t={t:.6g} (min eigenvalue {min_eig:.3e})")
        self.t = t
        self.min_eig = min_eig


class Blowup(NumericalBreakdown):
    def __init__(self, t, value):
        super().__init__(f"solution exceeded bound at t={t:.6g} (|value|={abs(value):.3e})")
        self.t = t
        self.value = value


class SingularityOnGrid(QHError):
    pass


class SingularityTooClose(SingularityOnGrid):
    pass


class GridTooShort(QHError):
    pass


class QuadratureTooCoarse(QHError):
    pass


class TruncationTooSmall(QHError):
    pass


class ConfigInvalid(QHError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class FamilyGateFailed(QHError):
    """Parameters are outside the family the closed-form solution covers."""
