"""pdgkit: proxy-dynamic-graph motion compiler and authoring service.

Turns a single image plus a user-built proxy dynamic graph into the dense
conditioning signals of a motion-guided video diffusion workflow: tracking
video, evolving disocclusion masks, latent composites with an N/M denoising
schedule, a checksummed conditioning bundle, and the computable evaluation
metrics, with a CLI and an HTTP authoring service on top.
"""

from .errors import (
    ChecksumError,
    DimensionMismatchError,
    DocumentError,
    GraphValidationError,
    InputError,
    InvalidDepthError,
    ManifestError,
    MaskOverlapError,
    ParamRangeError,
    PdgKitError,
    SynthSpecError,
    TensorFormatError,
    UndefinedMetricError,
    UnknownNodeError,
    ValidationError,
)
from .graph import (
    PDG,
    ROTATION,
    STATIC_ROOT,
    TRANSLATION,
    MotionEdge,
    PartNode,
    Pose,
    RigidTransform,
    Violation,
    clamp_pose,
    edge_transform,
    forward_kinematics,
    validate_pdg,
)
from .latent import (
    ConditioningBundle,
    LatentMask,
    LatentTensor,
    ScheduleDecision,
    apply_zero_rule,
    build_edit_video,
    build_pseudo_video,
    composite,
    downsample_mask,
    export_bundle,
    load_bundle,
    reference_encode,
    schedule_conditioning,
)
from .metrics import (
    MetricReport,
    estimate_flow,
    evaluate_sample,
    idiff,
    idiff_masked,
    optflow_score,
    psnr,
    ssim,
)
from .motion import (
    DisocclusionMask,
    FlowField,
    MotionTimeline,
    TrackingVideo,
    compute_disocclusion,
    ground_truth_flow,
    interpolate_timeline,
    render_tracking,
    transform_clouds,
)
from .scene import CameraModel, PointSet, Scene, load_scene, project, save_scene, unproject
from .synth import SynthResult, synth_scene

__version__ = "0.1.0"
