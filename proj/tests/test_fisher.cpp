#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qmle/estimate.hpp"
#include "qmle/fisher.hpp"
#include "qmle/rng.hpp"
#include "qmle/simulate.hpp"

#include <cmath>
#include <vector>

using namespace qmle;

namespace {

JointModel study_model() {
    return JointModel::from_parameters(ParameterVector(1.0759, {4.0, 5.0}), {{4.0, 4.0}});
}

const ParameterVector kThetaStar(1.0759, {4.0, 5.0});

std::vector<QuantizerBank> study_banks() {
    return {QuantizerBank({25.0, 25.0}), QuantizerBank({20.0, 20.0}),
            QuantizerBank({15.0, 15.0}), QuantizerBank({10.0, 10.0})};
}

double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / b.norm();
}

} // namespace

TEST_CASE("one-sensor information matches the Bernoulli oracle") {
    const ParameterVector theta(1.0, {4.0});
    const JointModel model = JointModel::from_parameters(theta, {{4.0}});
    const QuantizerBank bank({16.0});
    const FisherMatrix fim = fim_quantized(theta, bank, model);

    // Scalar finite-difference oracle on p(shape) = P(Y >= t).
    const double h = 1e-5 * 4.0;
    auto survival = [&](double shape) { return 1.0 - GammaMarginal(shape, 4.0).cdf(16.0); };
    const double p = survival(4.0);
    const double dp = (survival(4.0 + h) - survival(4.0 - h)) / (2.0 * h);
    const double oracle = dp * dp / (p * (1.0 - p));

    CHECK(fim.matrix(1, 1) == doctest::Approx(oracle).epsilon(1e-5));
    // The copula parameter carries no information through one sensor.
    CHECK(std::fabs(fim.matrix(0, 0)) < 1e-12);
}

TEST_CASE("step halving leaves the information stable") {
    const JointModel model = study_model();
    for (const auto& bank : study_banks()) {
        const FisherMatrix full = fim_quantized(kThetaStar, bank, model, 1e-5);
        const FisherMatrix half = fim_quantized(kThetaStar, bank, model, 5e-6);
        CHECK(rel_frobenius(half.matrix, full.matrix) < 1e-4);
    }
}

TEST_CASE("study-bank informations are positive definite at theta*") {
    const JointModel model = study_model();
    for (const auto& bank : study_banks()) {
        const FisherMatrix fim = fim_quantized(kThetaStar, bank, model);
        CHECK((fim.matrix - fim.matrix.transpose()).norm() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fim.matrix);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("the two categorical information identities agree") {
    const JointModel model = study_model();
    for (const auto& bank : study_banks()) {
        const FisherMatrix pmf_form = fim_quantized(kThetaStar, bank, model);
        const FisherMatrix log_form = fim_quantized_logform(kThetaStar, bank, model);
        CHECK(rel_frobenius(log_form.matrix, pmf_form.matrix) < 1e-4);
    }
}

TEST_CASE("information is rejected on an empty cell") {
    const JointModel model = study_model();
    // Zero threshold forces two zero-probability cells.
    CHECK_THROWS_AS(fim_quantized(kThetaStar, QuantizerBank({0.0, 15.0}), model),
                    std::runtime_error);
}

TEST_CASE("single-matrix combination inverts the information") {
    const JointModel model = study_model();
    const FisherMatrix fim = fim_quantized(kThetaStar, QuantizerBank({15.0, 15.0}), model);
    const FisherMatrix arr[1] = {fim};
    const CrlbPrediction pred = combine_fims(arr, WeightVector::equal(1));
    CHECK((pred.covariance * fim.matrix - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-8);
    CHECK(pred.condition_number > 1.0);
}

TEST_CASE("scalar outlier combination golden values") {
    const std::vector<FisherMatrix> with_outlier{FisherMatrix::scalar(3e-3),
                                                 FisherMatrix::scalar(3.0),
                                                 FisherMatrix::scalar(3.3)};
    const CrlbPrediction all = combine_fims(with_outlier, WeightVector::equal(3));
    CHECK(std::fabs(all.covariance(0, 0) - 0.4760) < 5e-5);

    const std::vector<FisherMatrix> without{FisherMatrix::scalar(3.0),
                                            FisherMatrix::scalar(3.3)};
    const CrlbPrediction rest = combine_fims(without, WeightVector::equal(2));
    CHECK(std::fabs(rest.covariance(0, 0) - 0.3175) < 5e-5);
}

TEST_CASE("outlier robustness ratios") {
    const CrlbPrediction with_outlier =
        combine_fims(std::vector<FisherMatrix>{FisherMatrix::scalar(3e-3),
                                               FisherMatrix::scalar(3.0),
                                               FisherMatrix::scalar(3.3)},
                     WeightVector::equal(3));
    const CrlbPrediction no_outlier =
        combine_fims(std::vector<FisherMatrix>{FisherMatrix::scalar(3.0),
                                               FisherMatrix::scalar(3.3)},
                     WeightVector::equal(2));
    const double outlier_variance = 1.0 / 3e-3;
    CHECK(with_outlier.covariance(0, 0) <= 1.6 * no_outlier.covariance(0, 0));
    CHECK(outlier_variance >= 600.0 * with_outlier.covariance(0, 0));
}

TEST_CASE("combination is bit-identical under joint permutation") {
    const JointModel model = study_model();
    std::vector<FisherMatrix> fims;
    for (const auto& bank : study_banks()) fims.push_back(fim_quantized(kThetaStar, bank, model));
    WeightVector w;
    w.omegas = {0.1, 0.2, 0.3, 0.4};

    const CrlbPrediction forward = combine_fims(fims, w);

    std::vector<FisherMatrix> permuted{fims[3], fims[1], fims[0], fims[2]};
    WeightVector wp;
    wp.omegas = {0.4, 0.2, 0.1, 0.3};
    const CrlbPrediction back = combine_fims(permuted, wp);

    CHECK(forward.covariance == back.covariance);
    CHECK(forward.condition_number == back.condition_number);
}

TEST_CASE("combined covariance never exceeds the worst single-bank spread") {
    const JointModel model = study_model();
    std::vector<FisherMatrix> fims;
    for (const auto& bank : study_banks()) fims.push_back(fim_quantized(kThetaStar, bank, model));
    const CrlbPrediction combined = combine_fims(fims, WeightVector::equal(fims.size()));

    double worst_single = 0.0;
    for (const auto& fim : fims) {
        const FisherMatrix arr[1] = {fim};
        const CrlbPrediction single = combine_fims(arr, WeightVector::equal(1));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(single.covariance);
        worst_single = std::max(worst_single, eig.eigenvalues().maxCoeff());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(combined.covariance);
    CHECK(eig.eigenvalues().maxCoeff() <= worst_single + 1e-10);
}

TEST_CASE("weights are validated") {
    const WeightVector too_heavy{{0.5, 0.6}};
    const WeightVector negative{{-0.5, 1.5}};
    CHECK_THROWS_AS(too_heavy.validate(), std::invalid_argument);
    CHECK_THROWS_AS(negative.validate(), std::invalid_argument);
    CHECK_NOTHROW(WeightVector::equal(7).validate());
    const std::uint64_t totals[3] = {10, 20, 30};
    const WeightVector w = WeightVector::from_totals(totals);
    CHECK_NOTHROW(w.validate());
    CHECK(w.omegas[0] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("singular combinations are rejected") {
    const std::vector<FisherMatrix> degenerate{FisherMatrix::scalar(0.0)};
    CHECK_THROWS_AS(combine_fims(degenerate, WeightVector::equal(1)), std::runtime_error);
}

TEST_CASE("predicted variance scales exactly as 1/N") {
    const JointModel model = study_model();
    const auto banks = study_banks();
    const WeightVector w = WeightVector::equal(banks.size());
    const auto at_n = predict_asymptotic_mse(kThetaStar, banks, w, model, 400);
    const auto at_2n = predict_asymptotic_mse(kThetaStar, banks, w, model, 800);
    for (std::size_t i = 0; i < at_n.size(); ++i) {
        CHECK(at_n[i] > 0.0);
        CHECK(at_n[i] == 2.0 * at_2n[i]);
    }

    const CrlbPrediction combined =
        combine_fims(std::vector<FisherMatrix>{fim_quantized(kThetaStar, banks[0], model),
                                               fim_quantized(kThetaStar, banks[1], model),
                                               fim_quantized(kThetaStar, banks[2], model),
                                               fim_quantized(kThetaStar, banks[3], model)},
                     w);
    for (std::size_t i = 0; i < at_n.size(); ++i) {
        CHECK(at_n[i] == combined.covariance(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(i)) /
                             400.0);
    }
}

TEST_CASE("prediction tracks the Monte Carlo spread of the multi-bank fit") {
    const JointModel model = study_model();
    const auto banks = study_banks();
    const std::uint64_t n_total = 4000;
    const auto predicted =
        predict_asymptotic_mse(kThetaStar, banks, WeightVector::equal(4), model, n_total);

    const int runs = 150;
    std::vector<std::vector<double>> estimates;
    for (int r = 0; r < runs; ++r) {
        const RawSamples pool = sample_joint(
            n_total, SamplerConfig{kThetaStar, derive_seed(808, static_cast<std::uint64_t>(r))},
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
        opts.seed = derive_seed(909, static_cast<std::uint64_t>(r));
        const MleResult fit = fit_quantized_mle(data, model, opts);
        if (fit.converged) estimates.push_back(fit.theta_hat.components());
    }
    REQUIRE(estimates.size() > 140);

    for (std::size_t comp = 0; comp < 3; ++comp) {
        double mean = 0.0;
        for (const auto& e : estimates) mean += e[comp];
        mean /= static_cast<double>(estimates.size());
        double var = 0.0;
        for (const auto& e : estimates) var += (e[comp] - mean) * (e[comp] - mean);
        var /= static_cast<double>(estimates.size() - 1);
        CHECK(var == doctest::Approx(predicted[comp]).epsilon(0.30));
    }
}
