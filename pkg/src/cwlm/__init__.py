"""Continuous weak linear measurement of a qubit with pre- and post-selection."""

__version__ = "0.1.0"

from .errors import CWLMError, PhysicsWarning  # noqa: E402
from .model import (  # noqa: E402
    DetectorParams,
    ObservableSpec,
    PostSelector,
    QubitParams,
    QubitState,
    make_post_selector,
    validate_experimental,
    validate_single_detector,
)
from .generator import (  # noqa: E402
    build_experimental,
    build_ideal,
    build_nondemolition,
    build_two_detector,
)
from .statistics import (  # noqa: E402
    ChiGridSpec,
    ConditionedCF,
    compare,
    conditioned_distribution,
    cumulants,
    invert,
    sample_cf,
)

__all__ = [
    "__version__", "CWLMError", "PhysicsWarning", "DetectorParams", "ObservableSpec",
    "PostSelector", "QubitParams", "QubitState", "make_post_selector",
    "validate_experimental", "validate_single_detector", "build_experimental",
    "build_ideal", "build_nondemolition", "build_two_detector", "ChiGridSpec",
    "ConditionedCF", "compare", "conditioned_distribution", "cumulants", "invert",
    "sample_cf",
]
