#include "qmle/estimate.hpp"

#include "qmle/nelder_mead.hpp"
#include "qmle/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qmle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Order-independent sum: sort addends before accumulating so permutations
// of the inputs produce bit-identical totals.
double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

double single_bank_loglik(const ParameterVector& theta, const QuantizerBank& bank,
                          const CellCounts& counts, const JointModel& model) {
    const CellPmf pmf = cell_pmf(theta, bank, model);
    std::vector<double> terms;
    terms.reserve(counts.counts.size());
    for (std::size_t c = 0; c < counts.counts.size(); ++c) {
        const std::uint64_t n = counts.counts[c];
        if (n == 0) continue;
        const double p = pmf.probs[c];
        if (p <= 0.0) return -kInf;
        terms.push_back(static_cast<double>(n) * std::log(p));
    }
    return sorted_sum(terms);
}

} // namespace

// ---------------------------------------------------------------------------
// CellCounts / datasets

void CellCounts::validate() const {
    std::uint64_t sum = 0;
    for (std::uint64_t c : counts) sum += c;
    if (sum != total) throw std::invalid_argument("CellCounts: counts do not sum to total");
}

CellCounts accumulate_counts(std::span<const CellWord> words, std::size_t sensor_count) {
    CellCounts out;
    out.counts.assign(std::size_t{1} << sensor_count, 0);
    for (const CellWord& w : words) {
        if (w.bits.size() != sensor_count) {
            throw std::invalid_argument("accumulate_counts: word length mismatch");
        }
        ++out.counts[w.index()];
    }
    out.total = words.size();
    return out;
}

CellCounts accumulate_count_indices(std::span<const std::size_t> cell_indices,
                                    std::size_t sensor_count) {
    CellCounts out;
    out.counts.assign(std::size_t{1} << sensor_count, 0);
    for (std::size_t idx : cell_indices) {
        if (idx >= out.counts.size()) {
            throw std::invalid_argument("accumulate_count_indices: index out of range");
        }
        ++out.counts[idx];
    }
    out.total = cell_indices.size();
    return out;
}

std::uint64_t QuantizedDataset::total() const {
    std::uint64_t n = 0;
    for (const auto& b : banks) n += b.counts.total;
    return n;
}

void QuantizedDataset::validate() const {
    if (banks.empty()) throw std::invalid_argument("QuantizedDataset: needs at least one bank");
    for (const auto& b : banks) {
        if (b.counts.counts.size() != b.bank.cell_count()) {
            throw std::invalid_argument("QuantizedDataset: counts length != cell count");
        }
        b.counts.validate();
    }
}

void RawSamples::push_back(std::span<const double> p) {
    if (dim == 0) dim = p.size();
    if (p.size() != dim) throw std::invalid_argument("RawSamples: point dimension mismatch");
    values.insert(values.end(), p.begin(), p.end());
}

RawSamples RawSamples::prefix(std::size_t n) const {
    if (n > size()) throw std::invalid_argument("RawSamples::prefix: not enough points");
    RawSamples out;
    out.dim = dim;
    out.values.assign(values.begin(), values.begin() + n * dim);
    return out;
}

// ---------------------------------------------------------------------------
// Log-likelihoods

double quantized_loglik(const ParameterVector& theta, const QuantizedDataset& data,
                        const JointModel& model) {
    data.validate();
    std::vector<double> per_bank;
    per_bank.reserve(data.banks.size());
    for (const auto& b : data.banks) {
        const double l = single_bank_loglik(theta, b.bank, b.counts, model);
        if (l == -kInf) return -kInf;
        per_bank.push_back(l);
    }
    return sorted_sum(per_bank);
}

double raw_loglik(const ParameterVector& theta, const RawSamples& samples,
                  const JointModel& model) {
    const JointModel at_theta = model.at(theta);
    std::vector<double> terms;
    terms.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double lp = at_theta.log_pdf(samples.point(i));
        if (lp == -kInf) return -kInf;
        terms.push_back(lp);
    }
    return sorted_sum(terms);
}

// ---------------------------------------------------------------------------
// MLE

MleResult fit_mle(const std::function<double(const ParameterVector&)>& loglik,
                  std::size_t dimension, const OptimizerOptions& opts) {
    if (dimension < 1) throw std::invalid_argument("fit_mle: dimension must be >= 1");
    if (opts.restarts < 1) throw std::invalid_argument("fit_mle: restarts must be >= 1");

    // Objective in log-parameter space: positivity holds by construction.
    auto objective = [&](std::span<const double> phi) {
        std::vector<double> comps(phi.size());
        for (std::size_t i = 0; i < phi.size(); ++i) comps[i] = std::exp(phi[i]);
        const ParameterVector theta = ParameterVector::from_components(comps);
        if (!theta.is_valid()) return -kInf; // exp overflow to inf
        return loglik(theta);
    };

    SimplexOptions sopts;
    sopts.diameter_tol = opts.diameter_tol;
    sopts.max_iterations = opts.max_iterations;

    Rng perturbation_rng(derive_seed(opts.seed, 0x7e57a7));
    struct Candidate {
        SimplexResult result;
        int restart_index;
    };
    std::vector<Candidate> finished;
    finished.reserve(opts.restarts);

    for (int r = 0; r < opts.restarts; ++r) {
        std::vector<double> start(dimension, 0.0); // all-ones in raw space
        if (r > 0) {
            for (double& s : start) s += 0.5 * perturbation_rng.normal01();
        }
        finished.push_back({maximize_simplex(objective, start, opts.initial_step, sopts), r});
    }

    // Best by value; ties within 1e-12 go to the lowest restart index.
    int best = 0;
    for (int r = 1; r < static_cast<int>(finished.size()); ++r) {
        if (finished[r].result.fmax > finished[best].result.fmax + 1e-12) best = r;
    }

    // Tied restarts that landed on materially different parameters signal a
    // flat (unidentified) optimum.
    bool ambiguous = false;
    for (const auto& cand : finished) {
        if (cand.restart_index == best) continue;
        if (std::fabs(cand.result.fmax - finished[best].result.fmax) <= 1e-12) {
            for (std::size_t i = 0; i < dimension; ++i) {
                if (std::fabs(cand.result.x[i] - finished[best].result.x[i]) > 1e-3) {
                    ambiguous = true;
                }
            }
        }
    }

    const SimplexResult& win = finished[best].result;
    std::vector<double> comps(dimension);
    for (std::size_t i = 0; i < dimension; ++i) comps[i] = std::exp(win.x[i]);

    MleResult out;
    out.theta_hat = ParameterVector::from_components(comps);
    out.loglik = win.fmax;
    out.converged = win.converged && !ambiguous && std::isfinite(win.fmax);
    out.iterations = win.iterations;
    out.n_restarts_used = static_cast<int>(finished.size());
    return out;
}

MleResult fit_quantized_mle(const QuantizedDataset& data, const JointModel& model,
                            const OptimizerOptions& opts) {
    data.validate();
    if (data.total() == 0) throw std::invalid_argument("fit_quantized_mle: empty dataset");
    const std::size_t k = model.sensor_count() + 1;
    return fit_mle([&](const ParameterVector& t) { return quantized_loglik(t, data, model); },
                   k, opts);
}

MleResult fit_raw_mle(const RawSamples& samples, const JointModel& model,
                      const OptimizerOptions& opts) {
    if (samples.size() == 0) throw std::invalid_argument("fit_raw_mle: empty sample set");
    if (samples.dim != model.sensor_count()) {
        throw std::invalid_argument("fit_raw_mle: sample dimension mismatch");
    }
    const std::size_t k = model.sensor_count() + 1;
    return fit_mle([&](const ParameterVector& t) { return raw_loglik(t, samples, model); },
                   k, opts);
}

} // namespace qmle
