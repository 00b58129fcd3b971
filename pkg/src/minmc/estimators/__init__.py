from ._base import empirical_loss
from .krr import KernelRidgeMinMC, krr_fit, krr_predict
from .mlp import MLPMinMC, TrainConfig, TrainingDivergedError, mlp_fit, mlp_predict
from .persistence import fit_from_dict, fit_to_dict, load_fit, save_fit
from .random_features import RandomFeatureRidge, rf_ridge_fit

__all__ = [
    "KernelRidgeMinMC",
    "MLPMinMC",
    "RandomFeatureRidge",
    "TrainConfig",
    "TrainingDivergedError",
    "empirical_loss",
    "fit_from_dict",
    "fit_to_dict",
    "krr_fit",
    "krr_predict",
    "load_fit",
    "mlp_fit",
    "mlp_predict",
    "rf_ridge_fit",
    "save_fit",
]
