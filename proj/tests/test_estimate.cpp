#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qmle/estimate.hpp"
#include "qmle/fisher.hpp"
#include "qmle/rng.hpp"
#include "qmle/simulate.hpp"

#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace qmle;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

JointModel study_model() {
    return JointModel::from_parameters(ParameterVector(1.0759, {4.0, 5.0}), {{4.0, 4.0}});
}

const ParameterVector kThetaStar(1.0759, {4.0, 5.0});

QuantizedDataset dataset_from_pool(const RawSamples& pool, const QuantizerBank& bank) {
    std::vector<std::size_t> cells;
    cells.reserve(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        cells.push_back(bank.quantize_index(pool.point(i)));
    }
    QuantizedDataset data;
    data.banks.push_back({bank, accumulate_count_indices(cells, bank.sensor_count())});
    return data;
}

} // namespace

TEST_CASE("accumulate counts") {
    CHECK(accumulate_counts({}, 2).total == 0);
    CHECK(accumulate_counts({}, 2).counts == std::vector<std::uint64_t>{0, 0, 0, 0});

    const std::vector<CellWord> words{CellWord{{0, 0}}, CellWord{{1, 1}}, CellWord{{1, 1}}};
    const CellCounts counts = accumulate_counts(words, 2);
    CHECK(counts.counts == std::vector<std::uint64_t>{1, 0, 0, 2});
    CHECK(counts.total == 3);
}

TEST_CASE("accumulated sampler counts match the cell pmf (Monte Carlo oracle)") {
    const JointModel model = study_model();
    const QuantizerBank bank({15.0, 15.0});
    const std::size_t n = 100000;
    const RawSamples pool = sample_joint(n, SamplerConfig{kThetaStar, 7}, model);
    const CellCounts counts = dataset_from_pool(pool, bank).banks[0].counts;
    const CellPmf pmf = cell_pmf(kThetaStar, bank, model);
    for (std::size_t c = 0; c < 4; ++c) {
        const double freq = static_cast<double>(counts.counts[c]) / static_cast<double>(n);
        const double sigma = std::sqrt(pmf.probs[c] * (1.0 - pmf.probs[c]) / n);
        CHECK(std::fabs(freq - pmf.probs[c]) < 3.0 * sigma);
    }
}

TEST_CASE("quantized loglik hand value at independence") {
    const JointModel model =
        JointModel::from_parameters(ParameterVector(1e-12, {4.0, 5.0}), {{4.0, 4.0}});
    const ParameterVector theta(1e-12, {4.0, 5.0});
    const double t1 = model.marginal(0).quantile(0.5);
    const double t2 = model.marginal(1).quantile(0.5);
    QuantizedDataset data;
    data.banks.push_back({QuantizerBank({t1, t2}), CellCounts{{1, 1, 1, 1}, 4}});
    CHECK(quantized_loglik(theta, data, model) ==
          doctest::Approx(-5.545177444479562).epsilon(1e-8));
}

TEST_CASE("quantized loglik is additive over banks") {
    const JointModel model = study_model();
    QuantizedDataset one;
    one.banks.push_back({QuantizerBank({15.0, 15.0}), CellCounts{{5, 7, 3, 11}, 26}});
    QuantizedDataset two = one;
    two.banks.push_back(one.banks[0]);

    const double single = quantized_loglik(kThetaStar, one, model);
    CHECK(quantized_loglik(kThetaStar, two, model) == 2.0 * single);

    // Mixed banks: the total equals the sum of the single-bank values.
    QuantizedDataset mixed;
    mixed.banks.push_back({QuantizerBank({15.0, 15.0}), CellCounts{{5, 7, 3, 11}, 26}});
    mixed.banks.push_back({QuantizerBank({20.0, 20.0}), CellCounts{{9, 2, 4, 1}, 16}});
    QuantizedDataset first, second;
    first.banks.push_back(mixed.banks[0]);
    second.banks.push_back(mixed.banks[1]);
    const double sum = quantized_loglik(kThetaStar, first, model) +
                       quantized_loglik(kThetaStar, second, model);
    CHECK(quantized_loglik(kThetaStar, mixed, model) == doctest::Approx(sum).epsilon(1e-14));

    // Permuting banks is bit-exact.
    QuantizedDataset permuted;
    permuted.banks.push_back(mixed.banks[1]);
    permuted.banks.push_back(mixed.banks[0]);
    CHECK(quantized_loglik(kThetaStar, mixed, model) ==
          quantized_loglik(kThetaStar, permuted, model));
}

TEST_CASE("quantized loglik log-zero sentinel") {
    const JointModel model = study_model();
    // A zero threshold forces the first-bit-low cells to probability zero.
    const QuantizerBank bank({0.0, 15.0});

    QuantizedDataset on_support;
    on_support.banks.push_back({bank, CellCounts{{0, 0, 3, 5}, 8}});
    CHECK(std::isfinite(quantized_loglik(kThetaStar, on_support, model)));

    QuantizedDataset off_support;
    off_support.banks.push_back({bank, CellCounts{{1, 0, 3, 5}, 9}});
    CHECK(quantized_loglik(kThetaStar, off_support, model) == -kInf);
}

TEST_CASE("raw loglik composition and permutation") {
    const JointModel model = study_model();
    RawSamples one;
    one.push_back(std::vector<double>{4.0, 7.0});
    CHECK(raw_loglik(kThetaStar, one, model) ==
          model.at(kThetaStar).log_pdf(std::vector<double>{4.0, 7.0}));

    RawSamples dup = one;
    dup.push_back(std::vector<double>{4.0, 7.0});
    CHECK(raw_loglik(kThetaStar, dup, model) == 2.0 * raw_loglik(kThetaStar, one, model));

    RawSamples abc, cba;
    const std::vector<std::vector<double>> pts{{4.0, 7.0}, {12.0, 3.0}, {25.0, 30.0}};
    for (const auto& p : pts) abc.push_back(p);
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) cba.push_back(*it);
    CHECK(raw_loglik(kThetaStar, abc, model) == raw_loglik(kThetaStar, cba, model));

    RawSamples bad = one;
    bad.push_back(std::vector<double>{-1.0, 2.0});
    CHECK(raw_loglik(kThetaStar, bad, model) == -kInf);
}

TEST_CASE("raw loglik prefers the truth over a distant point (grid oracle)") {
    const JointModel model = study_model();
    const RawSamples pool = sample_joint(500, SamplerConfig{kThetaStar, 99}, model);
    const double at_far = raw_loglik(ParameterVector(0.3, {1.0, 1.0}), pool, model);
    double near_max = -kInf;
    for (double d0 : {-0.2, 0.0, 0.2}) {
        for (double d1 : {-0.4, 0.0, 0.4}) {
            for (double d2 : {-0.5, 0.0, 0.5}) {
                const ParameterVector theta(1.0759 + d0, {4.0 + d1, 5.0 + d2});
                near_max = std::max(near_max, raw_loglik(theta, pool, model));
            }
        }
    }
    CHECK(near_max > at_far);
}

TEST_CASE("fit recovers the truth from idealized counts") {
    const JointModel model = study_model();
    const QuantizerBank bank({15.0, 15.0});
    const CellPmf pmf = cell_pmf(kThetaStar, bank, model);

    CellCounts counts;
    counts.counts.resize(4);
    for (std::size_t c = 0; c < 4; ++c) {
        counts.counts[c] = static_cast<std::uint64_t>(std::llround(1e6 * pmf.probs[c]));
        counts.total += counts.counts[c];
    }
    QuantizedDataset data;
    data.banks.push_back({bank, counts});

    OptimizerOptions opts;
    opts.seed = 11;
    const MleResult fit = fit_quantized_mle(data, model, opts);
    CHECK(fit.converged);
    CHECK(std::fabs(fit.theta_hat.theta0 - 1.0759) < 0.02);
    CHECK(std::fabs(fit.theta_hat.marginal_shapes[0] - 4.0) < 0.02);
    CHECK(std::fabs(fit.theta_hat.marginal_shapes[1] - 5.0) < 0.02);
}

TEST_CASE("multi-bank fit lands within predicted standard errors") {
    const JointModel model = study_model();
    const std::vector<QuantizerBank> banks{QuantizerBank({25.0, 25.0}),
                                           QuantizerBank({20.0, 20.0}),
                                           QuantizerBank({15.0, 15.0}),
                                           QuantizerBank({10.0, 10.0})};
    const std::uint64_t n_total = 4000;
    const auto predicted =
        predict_asymptotic_mse(kThetaStar, banks, WeightVector::equal(4), model, n_total);

    int within = 0;
    const int runs = 100;
    for (int r = 0; r < runs; ++r) {
        const RawSamples pool =
            sample_joint(n_total, SamplerConfig{kThetaStar, 1000 + static_cast<std::uint64_t>(r)},
                         model);
        QuantizedDataset data;
        const auto split = split_equally(n_total, banks.size());
        std::size_t offset = 0;
        for (std::size_t j = 0; j < banks.size(); ++j) {
            std::vector<std::size_t> cells;
            for (std::uint64_t i = 0; i < split[j]; ++i) {
                cells.push_back(banks[j].quantize_index(pool.point(offset + i)));
            }
            offset += split[j];
            data.banks.push_back({banks[j], accumulate_count_indices(cells, 2)});
        }
        OptimizerOptions opts;
        opts.seed = derive_seed(555, static_cast<std::uint64_t>(r));
        const MleResult fit = fit_quantized_mle(data, model, opts);
        if (!fit.converged) continue;
        const auto est = fit.theta_hat.components();
        const auto star = kThetaStar.components();
        bool ok = true;
        for (std::size_t i = 0; i < est.size(); ++i) {
            if (std::fabs(est[i] - star[i]) > 3.0 * std::sqrt(predicted[i])) ok = false;
        }
        if (ok) ++within;
    }
    CHECK(within >= 99);
}

TEST_CASE("degenerate one-sensor bank leaves the copula parameter unidentified") {
    const ParameterVector truth(1.0, {4.0});
    const JointModel model = JointModel::from_parameters(truth, {{4.0}});
    QuantizedDataset data;
    data.banks.push_back({QuantizerBank({16.0}), CellCounts{{320, 180}, 500}});
    OptimizerOptions opts;
    opts.seed = 3;
    const MleResult fit = fit_quantized_mle(data, model, opts); // must not throw
    CHECK_FALSE(fit.converged);
    CHECK(std::isfinite(fit.loglik));
}

TEST_CASE("fit value beats a log-space grid search (oracle)") {
    const JointModel model = study_model();
    const QuantizerBank bank({15.0, 15.0});
    const RawSamples pool = sample_joint(500, SamplerConfig{kThetaStar, 2024}, model);
    const QuantizedDataset data = dataset_from_pool(pool, bank);

    OptimizerOptions opts;
    opts.seed = 42;
    const MleResult fit = fit_quantized_mle(data, model, opts);

    double grid_max = -kInf;
    const auto star = kThetaStar.components();
    const int half = 15;
    for (int a = -half; a <= half; ++a) {
        for (int b = -half; b <= half; ++b) {
            for (int c = -half; c <= half; ++c) {
                const ParameterVector theta(std::exp(std::log(star[0]) + 0.5 * a / half),
                                            {std::exp(std::log(star[1]) + 0.5 * b / half),
                                             std::exp(std::log(star[2]) + 0.5 * c / half)});
                grid_max = std::max(grid_max, quantized_loglik(theta, data, model));
            }
        }
    }
    CHECK(fit.loglik >= grid_max - 1e-6);
}

TEST_CASE("fitted value never decreases with a larger iteration budget") {
    const JointModel model = study_model();
    const RawSamples pool = sample_joint(300, SamplerConfig{kThetaStar, 5}, model);
    const QuantizedDataset data = dataset_from_pool(pool, QuantizerBank({15.0, 15.0}));

    double previous = -kInf;
    for (int budget : {25, 100, 400, 2000}) {
        OptimizerOptions opts;
        opts.seed = 17;
        opts.max_iterations = budget;
        const MleResult fit = fit_quantized_mle(data, model, opts);
        CHECK(fit.loglik >= previous);
        previous = fit.loglik;
    }
}

TEST_CASE("fit is invariant to bank order") {
    const JointModel model = study_model();
    const RawSamples pool = sample_joint(400, SamplerConfig{kThetaStar, 12}, model);

    QuantizedDataset forward;
    forward.banks.push_back(dataset_from_pool(pool, QuantizerBank({15.0, 15.0})).banks[0]);
    forward.banks.push_back(dataset_from_pool(pool, QuantizerBank({20.0, 20.0})).banks[0]);
    QuantizedDataset reversed;
    reversed.banks.push_back(forward.banks[1]);
    reversed.banks.push_back(forward.banks[0]);

    OptimizerOptions opts;
    opts.seed = 8;
    const MleResult a = fit_quantized_mle(forward, model, opts);
    const MleResult b = fit_quantized_mle(reversed, model, opts);
    CHECK(a.theta_hat.components() == b.theta_hat.components());
    CHECK(a.loglik == b.loglik);
}

TEST_CASE("empty data is rejected") {
    const JointModel model = study_model();
    QuantizedDataset empty;
    CHECK_THROWS_AS(fit_quantized_mle(empty, model, OptimizerOptions{}), std::invalid_argument);

    QuantizedDataset zero;
    zero.banks.push_back({QuantizerBank({15.0, 15.0}), CellCounts{{0, 0, 0, 0}, 0}});
    CHECK_THROWS_AS(fit_quantized_mle(zero, model, OptimizerOptions{}), std::invalid_argument);

    CHECK_THROWS_AS(fit_raw_mle(RawSamples{}, model, OptimizerOptions{}), std::invalid_argument);
}
