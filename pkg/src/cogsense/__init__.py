"""Cooperative spectrum sensing over generalized fading, with SVM and
ensemble classifiers at the fusion center."""

from ._accel import NUMBA_ENABLED
from .channel import FadingParams, constant_snr_table, make_snr_sampler, sample_snr, snr_pdf
from .ensemble import (
    EnsembleModel,
    bootstrap_sample,
    ensemble_classify,
    ensemble_score,
    ensemble_scores,
    load_ensemble,
    save_ensemble,
    train_ensemble,
)
from .evaluation import RocCurve, auc, pd_at_pfa, pd_pfa_at, roc_curve, roc_from_points, save_roc
from .experiment import (
    ConfigError,
    ExperimentConfig,
    default_config,
    load_config,
    run,
    sweep,
    validate_config,
)
from .fusion import FusionRule, fuse, fusion_system_curve, local_decision
from .numerics import QuantileTable, build_quantile_table, log_besseli, marcum_q, reg_gamma_upper
from .sensing import (
    Dataset,
    EnergyVector,
    SensingConfig,
    analytic_ed_performance,
    energy_statistic,
    generate_dataset,
    load_dataset,
    save_dataset,
    simulate_event,
    threshold_for_pfa,
)
from .svm import (
    KernelSpec,
    SvmModel,
    TrainingError,
    classify,
    decision_value,
    decision_values,
    dual_objective,
    kernel_eval,
    kernel_matrix,
    kkt_violation,
    load_model,
    save_model,
    train_smo,
)

__version__ = "0.1.0"
