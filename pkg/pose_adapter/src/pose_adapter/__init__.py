"""pose-adapter: wrap pose-estimation backends to emit climbkit keypoint streams."""

from .adapter import (
    DEFAULT_MARGIN_FRACTION,
    ResolutionMismatch,
    VideoDecodeError,
    crop_region,
    extract,
    extract_to_file,
)
from .backends import (
    BackendDescriptor,
    BackendUnavailable,
    BrightSpotBackend,
    RawPerson,
    create_backend,
)

__version__ = "0.1.0"
