"""Two-camera player tracking on a court: homographies, HOG features,
distance-gated tracking and appearance re-identification."""

from .geometry import (
    CameraCalibration,
    CourtModel,
    Homography,
    HomogeneousPoint,
    Point2,
    apply,
    calibrate,
    compose,
    compute_homography,
    dehomogenize,
    invert,
)
from .features import Detection, GrayImage, HogParams, LinearSvmModel, cosine_similarity, detect, hog, nms
from .tracker import TrackerState, TrackEvent, associate, ncc_score, step
from .reid import PlayerRegistry, RearViewObservation
from .sim import EvalReport, PipelineConfig, ScenarioSpec, load_scenario, run_pipeline

__version__ = "0.1.0"
