"""Exception hierarchy shared by every module."""


class BayesInvError(Exception):
    """Base class for all toolkit errors."""


class BasisError(BayesInvError):
    """Coefficient vectors or operators declared on incompatible bases."""


class ModelError(BayesInvError):
    """Invalid model parameters (nonpositive spectrum, bad density, ...)."""


class DomainError(BayesInvError):
    """A path grid does not span the interval an operation requires."""


class NumericError(BayesInvError):
    """Nonfinite input or a failed numerical factorization."""


class DegenerateScaleError(NumericError):
    """Estimated spherical scale is zero; the posterior formula is undefined."""


class DegenerateQVError(NumericError):
    """Estimated time change is not strictly increasing and positive."""


class LevelError(BayesInvError):
    """Requested discretization level exceeds the truncation dimension."""


class SupportError(BayesInvError):
    """Particle measures live on different atom supports."""


class GridError(BayesInvError):
    """Hyperdensity grids do not coincide."""


class ConfigError(BayesInvError):
    """Experiment configuration failed schema validation."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")


class IoError(BayesInvError):
    """Reading or writing an artifact failed."""


class DegenerateEvidence(BayesInvError):
    """Every particle received zero likelihood (or the evidence is nonfinite).

    Compute routines report this as ``valid=False`` rather than raising; the
    exception is raised only when a downstream estimate is requested from an
    invalid posterior.
    """
