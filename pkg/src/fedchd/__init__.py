"""Federated learning simulator for tabular CHD risk prediction.

The package covers the full pipeline: CSV loading and imbalance
resampling (data), parameter-vector models (parametric), from-scratch
tree ensembles (trees), canonical wire encodings (wire), simulated
client-server protocols with byte accounting (federation), evaluation
metrics with a paired t-test (metrics), and a config-driven experiment
harness (experiment, cli).
"""

from .data import (
    BINARY,
    CONTINUOUS,
    FRAMINGHAM_SCHEMA,
    ClassStats,
    DataTable,
    DatasetError,
    FeatureSchema,
    SamplingStrategy,
    apply_local_smote,
    apply_ros,
    apply_rus,
    apply_sampling,
    load_csv,
    minority_class_stats,
    partition_clients,
    stratified_split,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    compare,
    config_from_dict,
    load_config,
    run,
    sweep,
    write_report,
)
from .federation import (
    AveragedParams,
    Channel,
    ClientHandle,
    CommLedger,
    DpConfig,
    FederationError,
    ForestUnion,
    GlobalModel,
    SubsetPolicy,
    WeightedShallowTrees,
    aggregate_minority_stats,
    dp_gaussianize,
    fedavg_aggregate,
    federated_smote_sync,
    ledger_bytes,
    make_clients,
    run_forest_federation,
    run_parametric_federation,
    run_xgb_feature_extraction,
    tree_subset_select,
)
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    TTestResult,
    confusion,
    evaluate,
    metrics_from,
    paired_t_test,
)
from .parametric import (
    LogisticConfig,
    ModelError,
    NeuralNetConfig,
    ParamVector,
    Standardizer,
    SvmConfig,
    train_logistic,
    train_nn,
    train_svm,
)
from .synthdata import synthetic_cohort, write_cohort_csv
from .trees import (
    FeatureImportance,
    ForestConfig,
    GbtConfig,
    TreeEnsemble,
    TreeError,
    TreeNode,
    fit_cart,
    fit_gbt,
    fit_random_forest,
    fit_top_p_tree,
    gbt_feature_importance,
    predict_forest_vote,
)

__version__ = "0.1.0"
