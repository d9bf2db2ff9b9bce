"""Representative-template selection for annotation-efficient landmark detection."""

from .errors import ScpError
from .features import (
    DescriptorConfig,
    FeatureLayer,
    FeatureMap,
    cosine_similarity,
    extract_features_builtin,
    point_similarity,
)
from .image import Image, read_pgm, write_pgm
from .keypoints import (
    Detector,
    KeyPoint,
    KeyPointSet,
    detect_keypoints_dog,
    detect_keypoints_grid,
    detect_keypoints_random,
)
from .matching import MatchResult, match_forward, match_forward_multi, match_reverse, match_reverse_batch
from .scpf import read_feature_file, write_feature_file
from .selection import (
    CombinationScore,
    SelectionReport,
    random_baseline,
    representative_score,
    select_templates,
)
from .evaluation import (
    EvalReport,
    LandmarkSet,
    detect_landmarks,
    landmark_representative_score,
    mre,
    oracle_template_sweep,
    pearson_cc,
    sdr,
)
from .synthetic import SyntheticDatasetSpec, generate_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "CombinationScore",
    "DescriptorConfig",
    "Detector",
    "EvalReport",
    "FeatureLayer",
    "FeatureMap",
    "Image",
    "KeyPoint",
    "KeyPointSet",
    "LandmarkSet",
    "MatchResult",
    "ScpError",
    "SelectionReport",
    "SyntheticDatasetSpec",
    "cosine_similarity",
    "detect_keypoints_dog",
    "detect_keypoints_grid",
    "detect_keypoints_random",
    "detect_landmarks",
    "extract_features_builtin",
    "generate_synthetic_dataset",
    "landmark_representative_score",
    "match_forward",
    "match_forward_multi",
    "match_reverse",
    "match_reverse_batch",
    "mre",
    "oracle_template_sweep",
    "pearson_cc",
    "point_similarity",
    "random_baseline",
    "read_feature_file",
    "read_pgm",
    "representative_score",
    "sdr",
    "select_templates",
    "write_feature_file",
    "write_pgm",
]
