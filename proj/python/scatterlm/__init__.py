"""SVM-guided Levenberg-Marquardt reconstruction for Mueller-matrix scatterometry."""

from ._core import (
    Bundle,
    FitResult,
    ForwardModel,
    Incidence,
    RunConfig,
    ScatterlmError,
    Signature,
    SvmModel,
    inject_errors,
    jones_to_mueller,
    kernel,
    lm_fit,
    lm_minimize,
    reconstruct,
    save_bundle,
    train_bundle,
    train_svm,
)

__version__ = "0.1.0"

__all__ = [
    "Bundle",
    "FitResult",
    "ForwardModel",
    "Incidence",
    "RunConfig",
    "ScatterlmError",
    "Signature",
    "SvmModel",
    "inject_errors",
    "jones_to_mueller",
    "kernel",
    "lm_fit",
    "lm_minimize",
    "reconstruct",
    "save_bundle",
    "train_bundle",
    "train_svm",
]
