"""TMS-EEG artifact removal: preprocessing, ICA with component
classification, SSP(-SIR), SOUND, time-frequency analysis, and a
ground-truth simulator for validating every stage.
"""

from .core import (
    ChannelInfo,
    ChannelOperator,
    EpochSet,
    Recording,
    dataset_hash,
    epoch,
    load_dataset,
    load_epochs,
    save_dataset,
    save_epochs,
)
from .errors import ConfigError, DataError, NumericalError, TmscleanError
from .ica import Decomposition, classify, classify_all, fit_infomax, project_out
from .montage import standard_montage
from .preprocess import (
    FirFilter,
    average_reference,
    design_fir,
    detect_bad_channels,
    downsample,
    excise_pulse,
    filter_zero_phase,
    pseudo_epoch,
    reject_amplitude,
)
from .sim import GroundTruth, SimConfig, score, simulate
from .sound import (
    LeadField,
    build_spherical_leadfield,
    compress_for_estimation,
    sound_clean,
    sound_estimate_noise,
    sound_operator,
)
from .ssp import apply_sir, apply_ssp, estimate_artifact_subspace, make_projector
from .tfr import beta_rebound_score, morlet_tfr

__version__ = "0.1.0"

__all__ = [
    "ChannelInfo", "ChannelOperator", "EpochSet", "Recording",
    "dataset_hash", "epoch", "load_dataset", "load_epochs",
    "save_dataset", "save_epochs",
    "ConfigError", "DataError", "NumericalError", "TmscleanError",
    "Decomposition", "classify", "classify_all", "fit_infomax", "project_out",
    "standard_montage",
    "FirFilter", "average_reference", "design_fir", "detect_bad_channels",
    "downsample", "excise_pulse", "filter_zero_phase", "pseudo_epoch",
    "reject_amplitude",
    "GroundTruth", "SimConfig", "score", "simulate",
    "LeadField", "build_spherical_leadfield", "compress_for_estimation",
    "sound_clean", "sound_estimate_noise", "sound_operator",
    "apply_sir", "apply_ssp", "estimate_artifact_subspace", "make_projector",
    "beta_rebound_score", "morlet_tfr",
]
