"""Exception types shared across the toolkit."""


class HelmavgError(Exception):
    """Base class for all toolkit errors."""


class PoleAtEndpoint(HelmavgError):
    """A contributing eigenvalue sits (numerically) on a range endpoint.

    The averaged response is undefined there; callers should resample the
    geometry or perturb the frequency range.
    """

    def __init__(self, kappa: float, endpoint: float, gap: float):
        self.kappa = float(kappa)
        self.endpoint = float(endpoint)
        self.gap = float(gap)
        super().__init__(
            f"contributing eigenvalue {kappa:.9g} lies within {gap:.3g} "
            f"of range endpoint {endpoint:.9g}"
        )


class LemmaHypothesisViolated(HelmavgError):
    """Strict-mode shape derivative: a contributing eigenvalue lies inside
    the closed frequency interval."""


class EigenSolverError(HelmavgError):
    """Eigenvalue solve failed to converge or violated its accuracy contract."""


class DegenerateMeshError(HelmavgError):
    """A mesh (or a mapped copy of one) contains a non-positive or
    badly shaped triangle."""
