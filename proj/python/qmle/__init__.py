"""Maximum likelihood estimation from dependent 1-bit quantized sensor data.

Thin Python surface over the C++ core: Gamma/Clayton joint models, threshold
quantizer banks, cell pmfs, quantized/raw MLE, Fisher information bounds, and
the seeded sampler.
"""

from ._core import (
    CellCounts,
    ClaytonCopula,
    CrlbPrediction,
    FisherMatrix,
    GammaMarginal,
    JointModel,
    MleResult,
    OptimizerOptions,
    ParameterVector,
    QuantizedDataset,
    QuantizerBank,
    WeightVector,
    __version__,
    cell_pmf,
    combine_fims,
    fim_quantized,
    fit_quantized_mle,
    fit_raw_mle,
    predict_asymptotic_mse,
    quantized_loglik,
    raw_loglik,
    sample_joint,
)

__all__ = [
    "CellCounts",
    "ClaytonCopula",
    "CrlbPrediction",
    "FisherMatrix",
    "GammaMarginal",
    "JointModel",
    "MleResult",
    "OptimizerOptions",
    "ParameterVector",
    "QuantizedDataset",
    "QuantizerBank",
    "WeightVector",
    "__version__",
    "cell_pmf",
    "combine_fims",
    "fim_quantized",
    "fit_quantized_mle",
    "fit_raw_mle",
    "predict_asymptotic_mse",
    "quantized_loglik",
    "raw_loglik",
    "sample_joint",
]
