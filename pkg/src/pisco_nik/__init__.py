"""Motion-resolved radial MRI with neural implicit k-space models and PISCO regularization."""

from .estimator import NIKReconstructor
from .grappa import GrappaInterpolator
from .kspace import KSampleSet, golden_angle_radial, simulate_acquisition
from .phantom import DynamicPhantom, Ellipse, coil_maps, navigator_signal
from .pisco import PiscoConfig, pisco_loss, pisco_step
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "DynamicPhantom",
    "Ellipse",
    "GrappaInterpolator",
    "KSampleSet",
    "NIKReconstructor",
    "PiscoConfig",
    "TrainConfig",
    "coil_maps",
    "golden_angle_radial",
    "navigator_signal",
    "pisco_loss",
    "pisco_step",
    "simulate_acquisition",
    "train",
]
