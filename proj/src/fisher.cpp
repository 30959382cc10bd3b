#include "qmle/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qmle {

namespace {

constexpr double kMinCellProb = 1e-12;

std::vector<CellPmf> pmf_stencil(const ParameterVector& theta, const QuantizerBank& bank,
                                 const JointModel& model, double step_scale,
                                 std::vector<double>& steps) {
    const std::vector<double> center = theta.components();
    const std::size_t k = center.size();
    steps.resize(k);
    // Layout: [0] center, then (plus, minus) pairs per component.
    std::vector<CellPmf> pmfs;
    pmfs.reserve(2 * k + 1);
    pmfs.push_back(cell_pmf(theta, bank, model));
    for (std::size_t i = 0; i < k; ++i) {
        const double h = step_scale * std::max(1.0, std::fabs(center[i]));
        steps[i] = h;
        std::vector<double> up = center, down = center;
        up[i] += h;
        down[i] -= h;
        pmfs.push_back(cell_pmf(ParameterVector::from_components(up), bank, model));
        pmfs.push_back(cell_pmf(ParameterVector::from_components(down), bank, model));
    }
    return pmfs;
}

void check_positive_cells(const CellPmf& pmf) {
    for (double p : pmf.probs) {
        if (p < kMinCellProb) {
            throw std::runtime_error(
                "fim_quantized: cell probability below 1e-12; information undefined");
        }
    }
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
    return 0.5 * (m + m.transpose());
}

} // namespace

FisherMatrix FisherMatrix::scalar(double information, std::string id) {
    FisherMatrix f;
    f.matrix = Eigen::MatrixXd::Constant(1, 1, information);
    f.theta_at = ParameterVector(1.0, {});
    f.bank_id = std::move(id);
    return f;
}

void WeightVector::validate() const {
    if (omegas.empty()) throw std::invalid_argument("WeightVector: empty");
    double sum = 0.0;
    for (double w : omegas) {
        if (w < 0.0) throw std::invalid_argument("WeightVector: negative weight");
        sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("WeightVector: weights must sum to 1");
    }
}

WeightVector WeightVector::equal(std::size_t count) {
    if (count == 0) throw std::invalid_argument("WeightVector::equal: count must be >= 1");
    WeightVector w;
    w.omegas.assign(count, 1.0 / static_cast<double>(count));
    // Force an exact unit sum in floating point.
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) sum += w.omegas[i];
    w.omegas.back() = 1.0 - sum;
    return w;
}

WeightVector WeightVector::from_totals(std::span<const std::uint64_t> totals) {
    std::uint64_t n = 0;
    for (std::uint64_t t : totals) n += t;
    if (n == 0) throw std::invalid_argument("WeightVector::from_totals: all totals zero");
    WeightVector w;
    w.omegas.reserve(totals.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < totals.size(); ++i) {
        double omega = static_cast<double>(totals[i]) / static_cast<double>(n);
        if (i + 1 == totals.size()) omega = std::max(0.0, 1.0 - sum);
        sum += omega;
        w.omegas.push_back(omega);
    }
    return w;
}

FisherMatrix fim_quantized(const ParameterVector& theta, const QuantizerBank& bank,
                           const JointModel& model, double step_scale) {
    std::vector<double> steps;
    const auto pmfs = pmf_stencil(theta, bank, model, step_scale, steps);
    check_positive_cells(pmfs[0]);

    const std::size_t k = theta.dimension();
    const std::size_t cells = pmfs[0].size();
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd grad(k);
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t i = 0; i < k; ++i) {
            grad(i) = (pmfs[1 + 2 * i].probs[c] - pmfs[2 + 2 * i].probs[c]) / (2.0 * steps[i]);
        }
        info += grad * grad.transpose() / pmfs[0].probs[c];
    }

    FisherMatrix out;
    out.matrix = symmetrized(info);
    out.theta_at = theta;
    out.bank_id = bank.label();
    return out;
}

FisherMatrix fim_quantized_logform(const ParameterVector& theta, const QuantizerBank& bank,
                                   const JointModel& model, double step_scale) {
    std::vector<double> steps;
    const auto pmfs = pmf_stencil(theta, bank, model, step_scale, steps);
    check_positive_cells(pmfs[0]);
    for (std::size_t s = 1; s < pmfs.size(); ++s) check_positive_cells(pmfs[s]);

    const std::size_t k = theta.dimension();
    const std::size_t cells = pmfs[0].size();
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd score(k);
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t i = 0; i < k; ++i) {
            score(i) = (std::log(pmfs[1 + 2 * i].probs[c]) - std::log(pmfs[2 + 2 * i].probs[c])) /
                       (2.0 * steps[i]);
        }
        info += pmfs[0].probs[c] * score * score.transpose();
    }

    FisherMatrix out;
    out.matrix = symmetrized(info);
    out.theta_at = theta;
    out.bank_id = bank.label();
    return out;
}

CrlbPrediction combine_fims(std::span<const FisherMatrix> fims, const WeightVector& weights) {
    if (fims.empty()) throw std::invalid_argument("combine_fims: no matrices");
    weights.validate();
    if (weights.omegas.size() != fims.size()) {
        throw std::invalid_argument("combine_fims: weight/matrix count mismatch");
    }
    const Eigen::Index k = fims[0].matrix.rows();
    const std::vector<double> theta_ref = fims[0].theta_at.components();
    for (std::size_t j = 0; j < fims.size(); ++j) {
        if (fims[j].matrix.rows() != k || fims[j].matrix.cols() != k) {
            throw std::invalid_argument("combine_fims: dimension mismatch across matrices");
        }
        const std::vector<double> theta_j = fims[j].theta_at.components();
        if (theta_j.size() != theta_ref.size()) {
            throw std::invalid_argument("combine_fims: matrices evaluated at different theta");
        }
        for (std::size_t i = 0; i < theta_ref.size(); ++i) {
            if (std::fabs(theta_j[i] - theta_ref[i]) >
                1e-9 * std::max(1.0, std::fabs(theta_ref[i]))) {
                throw std::invalid_argument("combine_fims: matrices evaluated at different theta");
            }
        }
    }

    // Entrywise sorted accumulation keeps the combination bit-identical
    // under joint permutations of (fims, weights).
    Eigen::MatrixXd weighted(k, k);
    std::vector<double> terms(fims.size());
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < k; ++c) {
            for (std::size_t j = 0; j < fims.size(); ++j) {
                terms[j] = weights.omegas[j] * fims[j].matrix(r, c);
            }
            std::sort(terms.begin(), terms.end());
            double s = 0.0;
            for (double t : terms) s += t;
            weighted(r, c) = s;
        }
    }
    weighted = symmetrized(weighted);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(weighted);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("combine_fims: eigen-decomposition failed");
    }
    const Eigen::VectorXd vals = eig.eigenvalues();
    const double lambda_max = vals.maxCoeff();
    const double lambda_min = vals.minCoeff();
    if (!(lambda_max > 0.0) || lambda_min < 1e-12 * lambda_max) {
        throw std::runtime_error("combine_fims: weighted information is singular");
    }

    CrlbPrediction out;
    out.covariance = symmetrized(eig.eigenvectors() * vals.cwiseInverse().asDiagonal() *
                                 eig.eigenvectors().transpose());
    out.condition_number = lambda_max / lambda_min;
    return out;
}

std::vector<double> predict_asymptotic_mse(const ParameterVector& theta_star,
                                           std::span<const QuantizerBank> banks,
                                           const WeightVector& weights,
                                           const JointModel& model, std::uint64_t n_samples) {
    if (n_samples == 0) throw std::invalid_argument("predict_asymptotic_mse: N must be >= 1");
    std::vector<FisherMatrix> fims;
    fims.reserve(banks.size());
    for (const auto& b : banks) fims.push_back(fim_quantized(theta_star, b, model));
    const CrlbPrediction crlb = combine_fims(fims, weights);
    std::vector<double> out(theta_star.dimension());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = crlb.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) /
                 static_cast<double>(n_samples);
    }
    return out;
}

} // namespace qmle
