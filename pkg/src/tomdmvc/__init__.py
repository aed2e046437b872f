"""Tucker-O-Minus tensor decomposition and low-rank multi-view clustering."""
from .baselines import BaselineRank, Decomposition, ominus_als, tucker_als, tutr_als
from .cluster import ClusterAssignment, kmeans, spectral_clustering
from .exceptions import (
    IngestionError,
    NumericalError,
    RankError,
    ShapeError,
    TomdError,
    ValidationError,
)
from .metrics import MetricReport, evaluate
from .mvc import (
    AdmmConfig,
    AdmmState,
    MultiViewDataset,
    admm_solve,
    affinity_from_z,
)
from .tensor_core import (
    ContractionNetwork,
    contract,
    mode_n_fold,
    mode_n_product,
    mode_n_unfold,
    read_tensor,
    reshape_phi,
    rse,
    write_tensor,
)
from .tomd import AlsConfig, TomdFactors, TomdRank, storage_cost, tomd_als

__version__ = "0.1.0"
