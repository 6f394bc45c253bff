"""Matrix-free minimization of log-sum-exp objectives of linear models.

The central solver, :func:`lsemink`, is a modified Newton-Krylov method
whose Hessian shift acts on the row-space metric of the models, keeping
every update inside the row space and the shifted quadratic model
bounded from below even when the softmax saturates.  Three baselines
(``newton_cg``, ``smnk``, ``ngd``) share the same line-search and trace
machinery, and problem generators cover smoothed-max minimization and
multinomial logistic regression.
"""

from .errors import (
    BadMagic,
    ConfigError,
    CountMismatch,
    DimensionMismatch,
    EmptyDataset,
    EmptyInput,
    IdxFormatError,
    InvalidEta,
    LseminkError,
    NonFiniteError,
    NonFiniteInput,
    NonFiniteValue,
    ScaleLimit,
    SingularTridiagonal,
    StaleCache,
    TruncatedFile,
    ZeroRhs,
)
from .harness import ExperimentSpec, RunSummary, SolverResult, compare_report, run_experiment
from .krylov import (
    KrylovConfig,
    KrylovOutcome,
    KrylovTermination,
    LanczosFactors,
    cg_solve,
    lanczos_factorize,
    lanczos_shifted_solve,
)
from .objective import EvalState, LinearTerm, LseObjective, TermState, logsumexp_stable
from .operators import (
    DenseOperator,
    KroneckerLeftOperator,
    LinearOperator,
    ScaledOperator,
    adjoint_check,
    dense_from_csv,
    identity,
    load_dense,
    save_dense,
)
from .problems import (
    GpInstance,
    MlrDataset,
    RfmExtractor,
    apply_rfm,
    classification_accuracy,
    load_mnist_idx,
    make_gp,
    make_gp_instance,
    make_mlr,
    make_rfm,
    make_synthetic_classification,
)
from .serialize import load_objective, save_objective
from .solvers import (
    IterationRecord,
    SolveStatus,
    SolveTrace,
    SolverConfig,
    load_trace_csv,
    lsemink,
    newton_cg,
    ngd,
    smnk,
    write_trace_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # operators
    "LinearOperator",
    "DenseOperator",
    "KroneckerLeftOperator",
    "ScaledOperator",
    "identity",
    "adjoint_check",
    "save_dense",
    "load_dense",
    "dense_from_csv",
    # objective
    "logsumexp_stable",
    "LinearTerm",
    "TermState",
    "EvalState",
    "LseObjective",
    # krylov
    "KrylovConfig",
    "KrylovOutcome",
    "KrylovTermination",
    "LanczosFactors",
    "cg_solve",
    "lanczos_factorize",
    "lanczos_shifted_solve",
    # solvers
    "SolverConfig",
    "SolveStatus",
    "SolveTrace",
    "IterationRecord",
    "lsemink",
    "newton_cg",
    "smnk",
    "ngd",
    "write_trace_csv",
    "load_trace_csv",
    # problems
    "GpInstance",
    "make_gp",
    "make_gp_instance",
    "MlrDataset",
    "RfmExtractor",
    "make_rfm",
    "apply_rfm",
    "make_mlr",
    "make_synthetic_classification",
    "load_mnist_idx",
    "classification_accuracy",
    # serialization
    "save_objective",
    "load_objective",
    # harness
    "ExperimentSpec",
    "SolverResult",
    "RunSummary",
    "run_experiment",
    "compare_report",
    # errors
    "LseminkError",
    "DimensionMismatch",
    "NonFiniteError",
    "NonFiniteInput",
    "NonFiniteValue",
    "EmptyInput",
    "ZeroRhs",
    "StaleCache",
    "SingularTridiagonal",
    "InvalidEta",
    "EmptyDataset",
    "ScaleLimit",
    "IdxFormatError",
    "BadMagic",
    "TruncatedFile",
    "CountMismatch",
    "ConfigError",
]
