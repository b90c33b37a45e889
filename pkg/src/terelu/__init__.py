"""Neural-network workbench built around the thresholded exponential rectified
linear unit (TERELU) and the activations it is usually compared against.

Everything runs on plain 2-D float64 numpy arrays with hand-written backward
passes, so every gradient can be checked against finite differences.
"""

from terelu.activations import ActivationSpec, Kind, TereluParams
from terelu.data import Dataset
from terelu.network import MetricsRow, Model, TrainConfig, build_fcnn

__all__ = [
    "ActivationSpec",
    "Dataset",
    "Kind",
    "MetricsRow",
    "Model",
    "TereluParams",
    "TrainConfig",
    "build_fcnn",
]

__version__ = "0.1.0"
