"""Exception hierarchy shared by all modules."""


class PHLoewnerError(Exception):
    """Base class. ``stage`` is filled in by the pipeline when re-raised."""

    stage: str | None = None

    def with_stage(self, stage: str) -> "PHLoewnerError":
        self.stage = stage
        return self

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


class ValidationError(PHLoewnerError, ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(PHLoewnerError, ArithmeticError):
    """A numerical step failed (singular solve, factorization, ...)."""


class SingularShiftError(NumericalError):
    """``sE - A`` is numerically singular at the requested point."""

    def __init__(self, s, msg: str | None = None):
        self.s = s
        super().__init__(msg or f"pencil is singular at s={s!r}")


class CoincidentPointError(ValidationError):
    def __init__(self, i: int, j: int, point):
        self.i, self.j, self.point = i, j, point
        super().__init__(f"left point {i} coincides with right point {j} (value {point!r})")


class RankError(NumericalError):
    """Requested order exceeds the numerical rank, or ranks disagree."""


class AxisEigenvalueError(NumericalError):
    def __init__(self, eigenvalues, msg: str | None = None):
        self.eigenvalues = list(eigenvalues)
        super().__init__(msg or f"eigenvalues on the imaginary axis: {self.eigenvalues}")


class SpectralZeroError(NumericalError):
    """Spectral zeros could not be computed or selected.

    ``near_axis`` lists the offending zeros when the failure is caused by
    zeros too close to the imaginary axis.
    """

    def __init__(self, msg: str, near_axis=None, zeros=None):
        self.near_axis = [] if near_axis is None else list(near_axis)
        self.zeros = [] if zeros is None else list(zeros)
        super().__init__(msg)


class IndefiniteLoewnerError(NumericalError):
    def __init__(self, min_eig: float, msg: str | None = None):
        self.min_eig = float(min_eig)
        super().__init__(
            msg
            or f"Loewner matrix is not positive definite (smallest eigenvalue {min_eig:.3e}); "
            "increase the shift or check the stabilization step"
        )
