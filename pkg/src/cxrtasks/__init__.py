"""Multi-task chest X-ray dataset derivation, token codecs, mixture sampling and evaluation."""

from .codec import (
    Detection,
    LocToken,
    SegmentationInstance,
    SegToken,
    decode_box,
    decode_mask,
    encode_box,
    encode_mask,
    render_suffix,
)
from .core import (
    BBox,
    BinaryMask,
    DiagnosisLabel,
    ImageInfo,
    Manifest,
    PathologyAnnotation,
    iou,
    load_manifest,
    mask_to_bbox,
    rasterize,
    validate_manifest,
)
from .datasets import TaskRecord, build_all, split_images
from .harness import OracleConfig, PipelineRun, oracle_predict, run_pipeline
from .mixture import build_schedule, compute_weights
from .parsing import normalize_answer, parse_detection, parse_segmentation

__version__ = "0.1.0"
