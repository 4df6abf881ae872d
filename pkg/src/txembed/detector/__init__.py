from txembed.detector.baselines import (
    BASELINES,
    GNB,
    IFOREST,
    LOGREG,
    GaussianNB,
    IsolationForest,
    LogisticRegression,
    SingleClassError,
    baseline_fit_predict,
)
from txembed.detector.ocsvm import (
    Kernel,
    KernelCache,
    OcsvmModel,
    Prediction,
    kkt_violation,
    ocsvm_fit,
    ocsvm_predict,
)

OCSVM = "ocsvm"
DETECTORS = (OCSVM,) + BASELINES

__all__ = [
    "BASELINES", "DETECTORS", "GNB", "IFOREST", "LOGREG", "OCSVM", "GaussianNB",
    "IsolationForest", "Kernel", "KernelCache", "LogisticRegression", "OcsvmModel",
    "Prediction", "SingleClassError", "baseline_fit_predict", "kkt_violation",
    "ocsvm_fit", "ocsvm_predict",
]
