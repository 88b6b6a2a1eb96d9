"""Quantum fidelity kernels vs classical kernels on parity-structured benchmarks."""

__version__ = "0.1.0"

from .datagen import Dataset, GeneratorConfig, SplitIndices  # noqa: F401
from .encoding import ScalerParams, Thresholds  # noqa: F401
from .experiments import ExperimentConfig, RunRecord, Summary  # noqa: F401
from .kernels import GramMatrix, KernelSpec  # noqa: F401
from .qsim import FeatureMapConfig, StateCache, StateVector  # noqa: F401
from .svm import CvPlan, GridSpec, SvmModel  # noqa: F401
