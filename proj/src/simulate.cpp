#include "qmle/simulate.hpp"

#include "qmle/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace qmle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Clayton conditional inversion: V | U = u has CDF dC/du, inverted in
// closed form.
double clayton_conditional_inverse(double u, double w, double theta0) {
    if (theta0 < ClaytonCopula::kIndependenceEps) return w;
    const double a = std::pow(w, -theta0 / (1.0 + theta0)) - 1.0;
    return std::pow(a * std::pow(u, -theta0) + 1.0, -1.0 / theta0);
}

} // namespace

RawSamples sample_joint(std::size_t n, const SamplerConfig& cfg, const JointModel& model) {
    cfg.theta_star.validate();
    const JointModel truth = model.at(cfg.theta_star);
    const std::size_t L = truth.sensor_count();
    if (L != 1 && L != 2) {
        throw std::invalid_argument("sample_joint: supports 1 or 2 sensors");
    }

    Rng rng(cfg.seed);
    RawSamples out;
    out.dim = L;
    out.values.reserve(n * L);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        out.values.push_back(truth.marginal(0).quantile(u));
        if (L == 2) {
            const double w = rng.uniform01();
            const double v = clayton_conditional_inverse(u, w, cfg.theta_star.theta0);
            out.values.push_back(truth.marginal(1).quantile(v));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// EstimatorSpec

std::string EstimatorSpec::label() const {
    switch (kind) {
        case EstimatorKind::Robust: return "robust";
        case EstimatorKind::Single: return "single:" + std::to_string(bank_index + 1);
        case EstimatorKind::Raw: return "raw";
        case EstimatorKind::RawSubset: return "raw_subset:" + std::to_string(divisor);
    }
    return "?";
}

EstimatorSpec EstimatorSpec::parse(const std::string& text) {
    EstimatorSpec spec;
    if (text == "robust") {
        spec.kind = EstimatorKind::Robust;
        return spec;
    }
    if (text == "raw") {
        spec.kind = EstimatorKind::Raw;
        return spec;
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (head == "single") {
            const long idx = std::stol(tail);
            if (idx < 1) throw std::invalid_argument("bank index");
            spec.kind = EstimatorKind::Single;
            spec.bank_index = static_cast<std::size_t>(idx - 1);
            return spec;
        }
        if (head == "raw_subset") {
            const long div = std::stol(tail);
            if (div < 1) throw std::invalid_argument("divisor");
            spec.kind = EstimatorKind::RawSubset;
            spec.divisor = static_cast<std::size_t>(div);
            return spec;
        }
    } catch (const std::exception&) {
        // fall through to the error below
    }
    throw std::invalid_argument("unknown estimator spec: " + text);
}

// ---------------------------------------------------------------------------
// ExperimentPlan

void ExperimentPlan::validate() const {
    if (banks.empty()) throw std::invalid_argument("ExperimentPlan: needs at least one bank");
    if (n_grid.empty()) throw std::invalid_argument("ExperimentPlan: empty N grid");
    if (estimators.empty()) throw std::invalid_argument("ExperimentPlan: no estimators");
    if (mc_runs < 1) throw std::invalid_argument("ExperimentPlan: mc_runs must be >= 1");
    const std::size_t L = banks.front().sensor_count();
    for (const auto& b : banks) {
        if (b.sensor_count() != L) {
            throw std::invalid_argument("ExperimentPlan: banks disagree on sensor count");
        }
    }
    for (const auto& e : estimators) {
        if (e.kind == EstimatorKind::Single && e.bank_index >= banks.size()) {
            throw std::invalid_argument("ExperimentPlan: single-bank index out of range");
        }
        if (e.kind == EstimatorKind::RawSubset && e.divisor == 0) {
            throw std::invalid_argument("ExperimentPlan: zero divisor");
        }
    }
}

std::vector<std::uint64_t> split_equally(std::uint64_t total, std::size_t groups) {
    if (groups == 0) throw std::invalid_argument("split_equally: zero groups");
    std::vector<std::uint64_t> out(groups, total / groups);
    const std::uint64_t remainder = total % groups;
    for (std::uint64_t i = 0; i < remainder; ++i) ++out[i];
    return out;
}

// ---------------------------------------------------------------------------
// Trials

TrialRecord run_single_trial(const ExperimentPlan& plan, const JointModel& truth,
                             std::uint64_t n_total, std::uint64_t run_index) {
    plan.validate();
    const std::uint64_t run_seed = plan.base_seed ^ run_index;

    SamplerConfig sampler{truth.parameters(), derive_seed(run_seed, kSamplerStream)};
    const RawSamples pool = sample_joint(n_total, sampler, truth);

    // Per-bank blocks for the multi-bank estimator: bank j consumes the
    // j-th contiguous block of its split size.
    const std::vector<std::uint64_t> split = split_equally(n_total, plan.banks.size());

    TrialRecord record;
    record.n_total = n_total;
    record.run_index = run_index;
    record.fits.reserve(plan.estimators.size());

    for (std::size_t e = 0; e < plan.estimators.size(); ++e) {
        const EstimatorSpec& spec = plan.estimators[e];
        OptimizerOptions opts = plan.optimizer;
        opts.seed = derive_seed(run_seed, kOptimizerStreamBase + e);

        MleResult result;
        std::uint64_t n_used = n_total;
        switch (spec.kind) {
            case EstimatorKind::Robust: {
                QuantizedDataset data;
                std::uint64_t offset = 0;
                for (std::size_t j = 0; j < plan.banks.size(); ++j) {
                    std::vector<std::size_t> cells;
                    cells.reserve(split[j]);
                    for (std::uint64_t i = 0; i < split[j]; ++i) {
                        cells.push_back(plan.banks[j].quantize_index(pool.point(offset + i)));
                    }
                    offset += split[j];
                    data.banks.push_back(
                        {plan.banks[j],
                         accumulate_count_indices(cells, plan.banks[j].sensor_count())});
                }
                result = fit_quantized_mle(data, truth, opts);
                break;
            }
            case EstimatorKind::Single: {
                const QuantizerBank& bank = plan.banks[spec.bank_index];
                std::vector<std::size_t> cells;
                cells.reserve(pool.size());
                for (std::size_t i = 0; i < pool.size(); ++i) {
                    cells.push_back(bank.quantize_index(pool.point(i)));
                }
                QuantizedDataset data;
                data.banks.push_back(
                    {bank, accumulate_count_indices(cells, bank.sensor_count())});
                result = fit_quantized_mle(data, truth, opts);
                break;
            }
            case EstimatorKind::Raw: {
                result = fit_raw_mle(pool, truth, opts);
                break;
            }
            case EstimatorKind::RawSubset: {
                const std::size_t n_subset = n_total / spec.divisor;
                if (n_subset == 0) {
                    throw std::invalid_argument("run_single_trial: raw subset empty");
                }
                n_used = n_subset;
                result = fit_raw_mle(pool.prefix(n_subset), truth, opts);
                break;
            }
        }
        record.fits.push_back({spec, std::move(result), n_used});
    }
    return record;
}

// ---------------------------------------------------------------------------
// Experiment

MseReport run_experiment(const ExperimentPlan& plan, const JointModel& truth, unsigned jobs) {
    plan.validate();
    if (jobs == 0) jobs = 1;

    struct Task {
        std::size_t n_index;
        std::uint64_t run_index;
    };
    std::vector<Task> tasks;
    tasks.reserve(plan.n_grid.size() * plan.mc_runs);
    for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni) {
        for (std::uint64_t r = 0; r < plan.mc_runs; ++r) tasks.push_back({ni, r});
    }

    std::vector<TrialRecord> records(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) break;
            try {
                records[t] = run_single_trial(plan, truth, plan.n_grid[tasks[t].n_index],
                                              tasks[t].run_index);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                break;
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    // Per-bank informations at the truth, reused for every prediction.
    const ParameterVector theta_star = truth.parameters();
    const std::size_t k = theta_star.dimension();
    std::vector<FisherMatrix> bank_fims;
    bool fims_ok = true;
    try {
        for (const auto& b : plan.banks) bank_fims.push_back(fim_quantized(theta_star, b, truth));
    } catch (const std::exception&) {
        fims_ok = false; // degenerate bank at the truth: no predictions
    }

    // Theory variance per component at sample size n, or empty when the
    // quantized CRLB does not apply to the estimator.
    auto theory_for = [&](const EstimatorSpec& spec,
                          std::uint64_t n_total) -> std::vector<double> {
        if (!fims_ok) return {};
        try {
            CrlbPrediction crlb;
            if (spec.kind == EstimatorKind::Robust) {
                crlb = combine_fims(bank_fims,
                                    WeightVector::from_totals(
                                        split_equally(n_total, plan.banks.size())));
            } else if (spec.kind == EstimatorKind::Single) {
                const FisherMatrix one[1] = {bank_fims[spec.bank_index]};
                crlb = combine_fims(one, WeightVector::equal(1));
            } else {
                return {};
            }
            std::vector<double> diag(k);
            for (std::size_t i = 0; i < k; ++i) {
                diag[i] = crlb.covariance(static_cast<Eigen::Index>(i),
                                          static_cast<Eigen::Index>(i)) /
                          static_cast<double>(n_total);
            }
            return diag;
        } catch (const std::exception&) {
            return {};
        }
    };

    MseReport report;
    report.mc_runs = plan.mc_runs;
    report.component_count = k;

    for (std::size_t ni = 0; ni < plan.n_grid.size(); ++ni) {
        const std::uint64_t n_total = plan.n_grid[ni];
        for (std::size_t e = 0; e < plan.estimators.size(); ++e) {
            // Collect per-run estimates in run-index order.
            std::vector<const MleResult*> results;
            results.reserve(plan.mc_runs);
            for (std::uint64_t r = 0; r < plan.mc_runs; ++r) {
                const TrialRecord& rec = records[ni * plan.mc_runs + r];
                results.push_back(&rec.fits[e].result);
            }
            const std::vector<double> star = theta_star.components();
            const std::vector<double> theory = theory_for(plan.estimators[e], n_total);
            for (std::size_t comp = 0; comp < k; ++comp) {
                MseReport::Cell cell;
                cell.estimator = plan.estimators[e].label();
                cell.n_total = n_total;
                cell.component = comp;

                std::uint64_t included = 0;
                double sum_sq = 0.0, sum_est = 0.0;
                std::vector<double> sq_errors;
                sq_errors.reserve(plan.mc_runs);
                for (const MleResult* r : results) {
                    if (!r->converged) continue;
                    const double est = r->theta_hat.components()[comp];
                    const double err = est - star[comp];
                    sq_errors.push_back(err * err);
                    sum_sq += err * err;
                    sum_est += est;
                    ++included;
                }
                cell.excluded = plan.mc_runs - included;
                if (included > 0) {
                    cell.mse = sum_sq / static_cast<double>(included);
                    cell.mean_estimate = sum_est / static_cast<double>(included);
                    double var = 0.0;
                    for (double sq : sq_errors) {
                        var += (sq - cell.mse) * (sq - cell.mse);
                    }
                    cell.mc_se = included > 1
                                     ? std::sqrt(var / (static_cast<double>(included) *
                                                        static_cast<double>(included - 1)))
                                     : kNaN;
                } else {
                    cell.mse = kNaN;
                    cell.mean_estimate = kNaN;
                    cell.mc_se = kNaN;
                }
                cell.theory_mse = theory.empty() ? kNaN : theory[comp];
                report.cells.push_back(std::move(cell));
            }
        }
    }
    return report;
}

} // namespace qmle
