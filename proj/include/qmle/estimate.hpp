#pragma once

#include "qmle/prob_models.hpp"
#include "qmle/quantize.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace qmle {

/// Observed occurrences of each quantizer cell for one bank.
struct CellCounts {
    std::vector<std::uint64_t> counts;
    std::uint64_t total = 0;

    void validate() const; // counts must sum to total
};

CellCounts accumulate_counts(std::span<const CellWord> words, std::size_t sensor_count);
CellCounts accumulate_count_indices(std::span<const std::size_t> cell_indices,
                                    std::size_t sensor_count);

/// Quantized observations grouped per bank.
struct QuantizedDataset {
    struct BankCounts {
        QuantizerBank bank;
        CellCounts counts;
    };
    std::vector<BankCounts> banks;

    std::uint64_t total() const;
    void validate() const;
};

/// Raw observations, row-major n x dim.
struct RawSamples {
    std::size_t dim = 0;
    std::vector<double> values;

    std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
    std::span<const double> point(std::size_t i) const {
        return std::span<const double>(values.data() + i * dim, dim);
    }
    void push_back(std::span<const double> p);
    /// First n points as a view-copy.
    RawSamples prefix(std::size_t n) const;
};

struct OptimizerOptions {
    double diameter_tol = 1e-8;
    int max_iterations = 2000;
    int restarts = 4;
    double initial_step = 0.25;     // log-space simplex edge
    std::uint64_t seed = 0;         // drives restart perturbations
};

struct MleResult {
    ParameterVector theta_hat;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    int n_restarts_used = 0;
};

/// Sum over banks and cells of count * log cell probability. Zero counts
/// contribute nothing even on zero-probability cells; a positive count on
/// a zero-probability cell yields -inf. Bank contributions are combined
/// order-independently, so permuting banks is bit-exact.
double quantized_loglik(const ParameterVector& theta, const QuantizedDataset& data,
                        const JointModel& model);

/// Sum of joint log pdfs; -inf if any sample is outside the support.
/// Per-sample terms are combined order-independently.
double raw_loglik(const ParameterVector& theta, const RawSamples& samples,
                  const JointModel& model);

/// Maximizes a log-likelihood over the positive orthant by downhill simplex
/// in componentwise log space, with multiple deterministic restarts: the
/// all-ones point plus perturbations drawn N(0, 0.5^2) from opts.seed.
/// Ties across restarts (within 1e-12) resolve to the lowest restart index;
/// restarts whose tied optima disagree in the parameters mark the fit
/// non-converged (unidentified optimum).
MleResult fit_mle(const std::function<double(const ParameterVector&)>& loglik,
                  std::size_t dimension, const OptimizerOptions& opts);

MleResult fit_quantized_mle(const QuantizedDataset& data, const JointModel& model,
                            const OptimizerOptions& opts);
MleResult fit_raw_mle(const RawSamples& samples, const JointModel& model,
                      const OptimizerOptions& opts);

} // namespace qmle
