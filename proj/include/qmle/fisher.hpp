#pragma once

#include "qmle/prob_models.hpp"
#include "qmle/quantize.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qmle {

/// Fisher information of one quantized observation under one bank,
/// evaluated at theta_at. Symmetric positive semidefinite.
struct FisherMatrix {
    Eigen::MatrixXd matrix;
    ParameterVector theta_at;
    std::string bank_id;

    /// 1x1 information, for scalar combination arithmetic.
    static FisherMatrix scalar(double information, std::string id = "");
};

/// Relative bank weights; must sum to 1 within 1e-12.
struct WeightVector {
    std::vector<double> omegas;

    void validate() const;
    static WeightVector equal(std::size_t count);
    static WeightVector from_totals(std::span<const std::uint64_t> totals);
};

/// Inverse of the weighted information sum: the asymptotic covariance of
/// the multi-bank estimator, scaled by 1/N for a finite sample.
struct CrlbPrediction {
    Eigen::MatrixXd covariance;
    double condition_number = 0.0;
};

/// Fisher information by the categorical identity sum_c grad(f_c) grad(f_c)' / f_c,
/// with cell-probability gradients from central finite differences
/// (per-component step step_scale * max(1, |theta_i|)). Throws if any cell
/// probability is below 1e-12.
FisherMatrix fim_quantized(const ParameterVector& theta, const QuantizerBank& bank,
                           const JointModel& model, double step_scale = 1e-5);

/// Same information through the score identity
/// sum_c f_c grad(log f_c) grad(log f_c)', for cross-validation.
FisherMatrix fim_quantized_logform(const ParameterVector& theta, const QuantizerBank& bank,
                                   const JointModel& model, double step_scale = 1e-5);

/// covariance = (sum_j w_j I_j)^-1 via symmetric eigen-decomposition.
/// Throws if the weighted sum is singular (smallest/largest eigenvalue
/// below 1e-12).
CrlbPrediction combine_fims(std::span<const FisherMatrix> fims, const WeightVector& weights);

/// Per-component asymptotic variance at sample size N: diag(covariance)/N.
std::vector<double> predict_asymptotic_mse(const ParameterVector& theta_star,
                                           std::span<const QuantizerBank> banks,
                                           const WeightVector& weights,
                                           const JointModel& model, std::uint64_t n_samples);

} // namespace qmle
