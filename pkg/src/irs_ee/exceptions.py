"""Exception types shared across the solvers."""


class Infeasible(Exception):
    """The QoS constraints cannot be met within the power caps."""


class NoFeasibleCandidate(Exception):
    """Gaussian randomization produced no QoS-feasible phase vector."""


class NotStrictlyFeasible(ValueError):
    """A barrier solver was handed a start point outside the interior."""


class MaxIterations(RuntimeError):
    """A Newton-type solver ran out of iterations before meeting its tolerance."""
