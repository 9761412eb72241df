"""Exception hierarchy. Each class maps to one failure family of the solver."""


class JHoloError(Exception):
    """Base class for all library errors."""


class ConfigurationError(JHoloError, ValueError):
    pass


class GeometryError(JHoloError, ValueError):
    pass


class StructureError(JHoloError):
    pass


class ChartError(JHoloError):
    pass


class ResolutionError(JHoloError):
    pass


class RangeError(JHoloError, ValueError):
    def __init__(self, msg, node=None):
        super().__init__(msg)
        self.node = node


class InverseError(JHoloError):
    def __init__(self, msg, defect=None):
        super().__init__(msg)
        self.defect = defect


class GateError(JHoloError):
    """A quantitative precondition (residual vs. radius) was not met."""

    def __init__(self, msg, rho=None, residual=None, stage=None):
        super().__init__(msg)
        self.rho = rho
        self.residual = residual
        self.stage = stage


class DivergenceError(JHoloError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


class GluingError(JHoloError):
    pass


class AttachmentError(JHoloError):
    def __init__(self, msg, measure=None):
        super().__init__(msg)
        self.measure = measure
