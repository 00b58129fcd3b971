"""Learning parameter-to-expectation maps by minimising a sampled,
ridge-regularised quadratic functional."""

from .estimators import (
    KernelRidgeMinMC,
    MLPMinMC,
    RandomFeatureRidge,
    TrainConfig,
    empirical_loss,
    load_fit,
    save_fit,
)
from .harness import ExperimentConfig, ExperimentReport, export_report, run_case_study
from .kernels import FeatureNodes, FilipovicKernel, LaplaceKernel, TriangularKernel
from .models import BlackScholesModel, BsSpec, HestonModel, HestonSpec, bs_price
from .numerics import RngStream
from .sampling import ParamSpace, SampleSet, build_samples, sample_study

__version__ = "0.1.0"

__all__ = [
    "BlackScholesModel",
    "BsSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "FeatureNodes",
    "FilipovicKernel",
    "HestonModel",
    "HestonSpec",
    "KernelRidgeMinMC",
    "LaplaceKernel",
    "MLPMinMC",
    "ParamSpace",
    "RandomFeatureRidge",
    "RngStream",
    "SampleSet",
    "TrainConfig",
    "TriangularKernel",
    "bs_price",
    "build_samples",
    "empirical_loss",
    "export_report",
    "load_fit",
    "run_case_study",
    "sample_study",
    "save_fit",
]
