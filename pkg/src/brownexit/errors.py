"""Exception hierarchy.

``SpecError`` marks malformed input (CLI exit status 2); every other
``BrownexitError`` is a runtime/budget failure (CLI exit status 3).
"""


class BrownexitError(Exception):
    code = "error"


class SpecError(BrownexitError, ValueError):
    code = "invalid_spec"


class PointOutsideDomain(BrownexitError, ValueError):
    code = "point_outside_domain"


class DegenerateSegment(BrownexitError):
    code = "degenerate_segment"


class MaxStepsExceeded(BrownexitError):
    code = "max_steps_exceeded"


class NotNested(BrownexitError):
    code = "not_nested"


class TooFewSamples(BrownexitError, ValueError):
    code = "too_few_samples"


class DivergentMoment(BrownexitError):
    code = "divergent_moment"


class BranchPole(BrownexitError, ValueError):
    code = "branch_pole"


class QuadratureStall(BrownexitError):
    code = "quadrature_stall"


class EmptyPlus(BrownexitError):
    code = "empty_plus"


class GlueHypothesisError(BrownexitError, ValueError):
    code = "glue_hypothesis"


class MaxAlternationsExceeded(BrownexitError):
    code = "max_alternations_exceeded"


class NotInUpperHalfPlane(BrownexitError, ValueError):
    code = "not_in_upper_half_plane"


class EvaluationFailure(BrownexitError):
    code = "evaluation_failure"


class DiskNotContained(BrownexitError, ValueError):
    code = "disk_not_contained"
