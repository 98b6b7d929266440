"""tabletop_adapter: bridges videos into the engine's session schema."""

from .backends import (
    AdapterError,
    BoxObs,
    FacialGeometryHeadPoseBackend,
    HeadPoseObs,
    HsvObjectBackend,
    KeypointObs,
    MarkerPoseBackend,
)
from .export import AdapterConfig, KEYPOINT_ID_MAP, build_session_docs, export_session
from .schema import SchemaError, validate_session_docs

__version__ = "0.1.0"
