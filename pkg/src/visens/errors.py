"""Exception hierarchy shared by all solvers and checks."""


class VisensError(Exception):
    """Base class for every error raised by this package."""

    code = "error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class NonConvergence(VisensError):
    code = "non_convergence"

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class InvalidStep(VisensError):
    code = "invalid_step"


class Infeasible(VisensError):
    code = "infeasible"


class NotNormal(VisensError):
    code = "not_normal"


class NotCoercive(VisensError):
    code = "not_coercive"

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class InvalidInstance(VisensError):
    code = "invalid_instance"

    def __init__(self, message, invariant=None):
        super().__init__(message)
        self.invariant = invariant


class OutsideEnlargement(VisensError):
    code = "outside_enlargement"


class SetValued(VisensError):
    code = "set_valued"


class NewtonDiverged(VisensError):
    code = "newton_diverged"


class SwitchCollision(VisensError):
    code = "switch_collision"


class DegenerateSlope(VisensError):
    code = "degenerate_slope"


class ConfigError(VisensError):
    code = "config_error"


class RayError(VisensError):
    """Solver failure at one point of a parameter ray."""

    code = "ray_error"

    def __init__(self, t, cause):
        super().__init__(f"solver failed at t={t!r}: {cause}")
        self.t = t
        self.cause = cause

    def to_dict(self):
        out = super().to_dict()
        out["t"] = self.t
        if isinstance(self.cause, VisensError):
            out["cause"] = self.cause.to_dict()
        return out
