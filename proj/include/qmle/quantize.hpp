#pragma once

#include "qmle/prob_models.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qmle {

/// Binary threshold indicator: emits 1 iff x >= threshold.
struct ThresholdQuantizer {
    double threshold;
    bool operator()(double x) const { return x >= threshold; }
};

/// Joint quantizer output for one observation: ordered bits, one per
/// sensor. Canonical index treats bits[0] as the most significant bit.
struct CellWord {
    std::vector<std::uint8_t> bits;

    std::size_t index() const;
    static CellWord from_index(std::size_t index, std::size_t sensor_count);

    bool operator==(const CellWord&) const = default;
};

/// One group of per-sensor threshold quantizers.
class QuantizerBank {
public:
    explicit QuantizerBank(std::vector<double> thresholds, std::string label = "");

    std::size_t sensor_count() const { return quantizers_.size(); }
    std::size_t cell_count() const { return std::size_t{1} << quantizers_.size(); }
    const std::vector<ThresholdQuantizer>& quantizers() const { return quantizers_; }
    std::vector<double> thresholds() const;
    const std::string& label() const { return label_; }

    CellWord quantize(std::span<const double> y) const;
    std::size_t quantize_index(std::span<const double> y) const;

private:
    std::vector<ThresholdQuantizer> quantizers_;
    std::string label_;
};

/// Categorical distribution over the 2^L quantizer cells.
struct CellPmf {
    std::vector<double> probs; // indexed by CellWord::index()

    double operator[](const CellWord& w) const { return probs[w.index()]; }
    std::size_t size() const { return probs.size(); }
};

/// Exact cell probabilities for a bank under the model at theta, by
/// inclusion-exclusion over the joint CDF. Tiny negative entries from
/// cancellation (>= -1e-12) are clamped to zero and the vector is
/// renormalized; larger violations or a total off 1 by more than 1e-10
/// raise a consistency error.
CellPmf cell_pmf(const ParameterVector& theta, const QuantizerBank& bank,
                 const JointModel& model);

/// Validation utility (2 sensors only): integrates the joint pdf over each
/// cell rectangle on an n_grid x n_grid truncated domain and returns the
/// max absolute discrepancy against cell_pmf. The truncation default covers
/// all but ~1e-6 of the mass for the shipped experiment.
double cell_region_volume_check(const ParameterVector& theta, const QuantizerBank& bank,
                                const JointModel& model, int n_grid,
                                double y_max = 60.0);

} // namespace qmle
