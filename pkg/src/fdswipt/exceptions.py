"""Exception and warning types raised across the package."""


class ContractError(ValueError):
    """An input violates a documented precondition (shape, symmetry, sign)."""


class SingularMatrixError(ArithmeticError):
    """A matrix expected to be positive definite is singular or indefinite."""


class InfeasibleError(RuntimeError):
    """The requested design problem has no feasible point."""


class InfeasibleUplink(InfeasibleError):
    """The uplink SINR targets cannot be met under the power cap."""


class DegenerateChannel(InfeasibleError):
    """A user's channel is (numerically) orthogonal to its zero-forcing subspace."""


class NonConvergence(RuntimeError):
    """An iterative procedure hit its iteration cap.

    The last iterate is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class RankDeficiencyWarning(UserWarning):
    """A relaxed beamforming matrix is not numerically rank one."""


class CapViolationWarning(UserWarning):
    """A per-node power exceeds ``p_max``; the solution is still returned."""


class SolverError(RuntimeError):
    """The conic solver stopped without an optimal point or a certificate."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
