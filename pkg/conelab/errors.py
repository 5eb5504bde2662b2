"""
Conelab Errors

Exception hierarchy shared by every lab module.
"""


class LabError(Exception):
    """Base class for all lab failures"""


class GeometryError(LabError, ValueError):
    """Invalid cone pose or point not on the expected set"""


class RecenterError(GeometryError):
    """No admissible recentering radius exists"""


class ResolutionError(LabError, ValueError):
    """Grid or sampling too coarse for the requested quantity"""


class SeparationError(LabError):
    """Crack leaves its slab or fails to separate"""


class OrientationError(LabError):
    """Region map between nested balls is not injective"""


class SolverError(LabError, RuntimeError):
    """Linear solve did not converge"""


class SpectralError(SolverError):
    """Eigen-iteration stagnated or produced an invalid eigenvalue"""


class ExtensionError(LabError):
    """Whitney extension could not be assembled"""


class CertificateError(LabError):
    """Decay experiment requested without a passing flatness certificate"""


class ConfigError(LabError, ValueError):
    """Scenario configuration could not be parsed or validated"""


class PlotError(LabError):
    """Profile plot could not be produced"""
