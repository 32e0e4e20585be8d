"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid trajectory, parameters, or scenario.

    ``problems`` lists every violated invariant so callers can report
    them all at once instead of one per run.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SolverError(RuntimeError):
    """The QP could not be solved (indefinite Hessian, NaNs, singular system)."""


class SimulationError(RuntimeError):
    pass
