"""Exception hierarchy shared by the simulator, the CLI and the HTTP layer."""


class VGSwarmError(Exception):
    pass


class UnknownBodyError(VGSwarmError):
    def __init__(self, body_id):
        super().__init__(f"unknown body id {body_id}")
        self.body_id = body_id


class UndefinedExpansionError(VGSwarmError):
    """Box areas are equal, so optical expansion carries no depth."""


class RejectedSampleError(VGSwarmError):
    """Expansion depth contradicts the observed motion (non-positive depth)."""


class FitError(VGSwarmError):
    pass


class SolverError(VGSwarmError):
    def __init__(self, message, residual, iterations):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations


class PatternUnavailableError(VGSwarmError):
    def __init__(self, reason):
        super().__init__(f"entrapping pattern unavailable: {reason}")
        self.reason = reason


class GridBoundsError(VGSwarmError):
    pass


class ScenarioError(VGSwarmError):
    pass


class OutputExistsError(VGSwarmError):
    pass
