#include "qmle/quantize.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qmle {

namespace {

constexpr double kNegativeClamp = -1e-12;
constexpr double kSumTolerance = 1e-10;

// Signed-corner sum over the joint CDF in copula space. For cell bit 0 the
// coordinate interval is [0, u_i]; for bit 1 it is [u_i, 1].
double cell_probability_general(const ClaytonCopula& copula,
                                std::span<const double> marginal_u,
                                std::size_t cell_index) {
    const std::size_t L = marginal_u.size();
    const std::size_t corners = std::size_t{1} << L;
    std::vector<double> corner(L);
    double prob = 0.0;
    for (std::size_t m = 0; m < corners; ++m) {
        int lower_picks = 0;
        bool zero_corner = false;
        for (std::size_t i = 0; i < L; ++i) {
            const bool bit_set = (cell_index >> (L - 1 - i)) & 1u;
            const bool pick_upper = (m >> (L - 1 - i)) & 1u;
            double value;
            if (bit_set) {
                value = pick_upper ? 1.0 : marginal_u[i];
            } else {
                value = pick_upper ? marginal_u[i] : 0.0;
            }
            if (!pick_upper) ++lower_picks;
            if (value == 0.0) { zero_corner = true; break; }
            corner[i] = value;
        }
        if (zero_corner) continue;
        const double term = copula.cdf(corner);
        prob += (lower_picks % 2 == 0) ? term : -term;
    }
    return prob;
}

} // namespace

// ---------------------------------------------------------------------------
// CellWord

std::size_t CellWord::index() const {
    std::size_t idx = 0;
    for (std::uint8_t b : bits) idx = (idx << 1) | (b ? 1u : 0u);
    return idx;
}

CellWord CellWord::from_index(std::size_t index, std::size_t sensor_count) {
    CellWord w;
    w.bits.resize(sensor_count);
    for (std::size_t i = 0; i < sensor_count; ++i) {
        w.bits[i] = static_cast<std::uint8_t>((index >> (sensor_count - 1 - i)) & 1u);
    }
    return w;
}

// ---------------------------------------------------------------------------
// QuantizerBank

QuantizerBank::QuantizerBank(std::vector<double> thresholds, std::string label)
    : label_(std::move(label)) {
    if (thresholds.empty()) throw std::invalid_argument("QuantizerBank: needs >= 1 threshold");
    if (thresholds.size() > 20) throw std::invalid_argument("QuantizerBank: too many sensors");
    quantizers_.reserve(thresholds.size());
    for (double t : thresholds) quantizers_.push_back(ThresholdQuantizer{t});
    if (label_.empty()) {
        std::ostringstream os;
        os << "bank(";
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (i) os << ",";
            os << thresholds[i];
        }
        os << ")";
        label_ = os.str();
    }
}

std::vector<double> QuantizerBank::thresholds() const {
    std::vector<double> t;
    t.reserve(quantizers_.size());
    for (const auto& q : quantizers_) t.push_back(q.threshold);
    return t;
}

CellWord QuantizerBank::quantize(std::span<const double> y) const {
    if (y.size() != sensor_count()) {
        throw std::invalid_argument("QuantizerBank::quantize: point dimension mismatch");
    }
    CellWord w;
    w.bits.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        w.bits[i] = quantizers_[i](y[i]) ? 1 : 0;
    }
    return w;
}

std::size_t QuantizerBank::quantize_index(std::span<const double> y) const {
    if (y.size() != sensor_count()) {
        throw std::invalid_argument("QuantizerBank::quantize_index: point dimension mismatch");
    }
    std::size_t idx = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        idx = (idx << 1) | (quantizers_[i](y[i]) ? 1u : 0u);
    }
    return idx;
}

// ---------------------------------------------------------------------------
// cell_pmf

CellPmf cell_pmf(const ParameterVector& theta, const QuantizerBank& bank,
                 const JointModel& model) {
    theta.validate();
    if (bank.sensor_count() != model.sensor_count()) {
        throw std::invalid_argument("cell_pmf: bank/model sensor count mismatch");
    }
    const JointModel at_theta = model.at(theta);
    const std::size_t L = bank.sensor_count();

    std::vector<double> u(L);
    for (std::size_t i = 0; i < L; ++i) {
        const double t = bank.quantizers()[i].threshold;
        u[i] = t <= 0.0 ? 0.0 : at_theta.marginal(i).cdf(t);
    }

    CellPmf pmf;
    pmf.probs.resize(bank.cell_count());
    if (L == 2) {
        const double c = at_theta.copula().cdf(u[0], u[1]);
        pmf.probs[0] = c;                       // (0,0)
        pmf.probs[1] = u[0] - c;                // (0,1)
        pmf.probs[2] = u[1] - c;                // (1,0)
        pmf.probs[3] = 1.0 - u[0] - u[1] + c;   // (1,1)
    } else {
        for (std::size_t cell = 0; cell < pmf.probs.size(); ++cell) {
            pmf.probs[cell] = cell_probability_general(at_theta.copula(), u, cell);
        }
    }

    double sum = 0.0;
    for (double& p : pmf.probs) {
        if (p < 0.0) {
            if (p < kNegativeClamp) {
                throw std::runtime_error("cell_pmf: negative cell probability beyond tolerance");
            }
            p = 0.0;
        }
        sum += p;
    }
    if (std::fabs(sum - 1.0) > kSumTolerance) {
        throw std::runtime_error("cell_pmf: probabilities do not sum to 1");
    }
    for (double& p : pmf.probs) p /= sum;
    return pmf;
}

double cell_region_volume_check(const ParameterVector& theta, const QuantizerBank& bank,
                                const JointModel& model, int n_grid, double y_max) {
    if (bank.sensor_count() != 2) {
        throw std::invalid_argument("cell_region_volume_check: requires exactly 2 sensors");
    }
    if (n_grid < 8) throw std::invalid_argument("cell_region_volume_check: grid too coarse");

    const JointModel at_theta = model.at(theta);
    const CellPmf pmf = cell_pmf(theta, bank, model);
    const double t1 = bank.quantizers()[0].threshold;
    const double t2 = bank.quantizers()[1].threshold;

    // Midpoint rule per cell rectangle, truncated at y_max.
    auto integrate_rect = [&](double x_lo, double x_hi, double y_lo, double y_hi) {
        if (x_hi <= x_lo || y_hi <= y_lo) return 0.0;
        const double hx = (x_hi - x_lo) / n_grid;
        const double hy = (y_hi - y_lo) / n_grid;
        double total = 0.0;
        for (int i = 0; i < n_grid; ++i) {
            const double x = x_lo + (i + 0.5) * hx;
            double row = 0.0;
            for (int j = 0; j < n_grid; ++j) {
                const double y = y_lo + (j + 0.5) * hy;
                const double pt[2] = {x, y};
                row += at_theta.pdf(pt);
            }
            total += row * hy;
        }
        return total * hx;
    };

    const double lo1 = std::max(0.0, std::min(t1, y_max));
    const double lo2 = std::max(0.0, std::min(t2, y_max));
    double worst = 0.0;
    const double est[4] = {
        integrate_rect(0.0, lo1, 0.0, lo2),     // (0,0)
        integrate_rect(0.0, lo1, lo2, y_max),   // (0,1)
        integrate_rect(lo1, y_max, 0.0, lo2),   // (1,0)
        integrate_rect(lo1, y_max, lo2, y_max), // (1,1)
    };
    for (int c = 0; c < 4; ++c) {
        worst = std::max(worst, std::fabs(est[c] - pmf.probs[c]));
    }
    return worst;
}

} // namespace qmle
