"""Adversarial perturbation of RGB-D visual odometry with a surrogate CNN."""

from .attacks import TABLE_EPSILONS, AttackConfig, attack, attack_depth, fgsm, pgd
from .dataset_io import DepthFrame, ImageFrame, RegionSet, load_regions, load_tum_sequence
from .errors import ConfigError, DataError, StageError, TrackingLost
from .experiment import ExperimentConfig, load_config, parse_config, run, sweep
from .frontend import FrontendConfig, extract, match_features
from .geometry import Intrinsics, Pose
from .metrics import AteReport, compute_ate
from .odometry import Tracker, TrackerConfig
from .pipeline import run_sequence
from .scheduler import Schedule
from .surrogate import build_surrogate, load_weights, save_weights
from .synthetic import generate_synthetic_sequence

__version__ = "0.1.0"
