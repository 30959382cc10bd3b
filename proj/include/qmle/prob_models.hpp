#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qmle {

/// Gamma marginal with free shape and fixed scale. The shape is the
/// per-sensor parameter being estimated; the scale stays fixed.
struct GammaMarginal {
    double shape;
    double scale;

    GammaMarginal(double shape_, double scale_);

    double pdf(double y) const;
    double log_pdf(double y) const; // -inf outside the support
    double cdf(double y) const;
    /// Inverse CDF; |cdf(result) - p| <= 1e-12. Newton safeguarded by
    /// bisection on a bracketing interval.
    double quantile(double p) const;

    double mean() const { return shape * scale; }
};

/// One-parameter copula with lower-tail dependence, restricted to
/// positive dependence (theta0 > 0). Below kIndependenceEps the product
/// copula is evaluated instead to avoid cancellation.
struct ClaytonCopula {
    static constexpr double kIndependenceEps = 1e-8;

    double theta0;

    explicit ClaytonCopula(double theta0_);

    /// Bivariate CDF; boundary arguments {0,1} are handled exactly.
    double cdf(double u, double v) const;
    /// CDF over an arbitrary number of coordinates (Archimedean form).
    /// Coordinates equal to 1 drop out exactly; any 0 gives 0.
    double cdf(std::span<const double> u) const;

    /// Bivariate density; throws on boundary arguments.
    double density(double u, double v) const;
    /// Log density over interior coordinates, any dimension.
    double log_density(std::span<const double> u) const;

    /// Rank correlation 12 * integral of the CDF - 3, by adaptive 2-D
    /// quadrature to absolute tolerance 1e-5.
    double spearman_rho() const;

    /// Inverse of spearman_rho by bisection.
    static ClaytonCopula from_spearman(double rho);
};

/// Free parameters of the joint model: copula parameter followed by the
/// marginal shapes. All components strictly positive; k = L + 1.
struct ParameterVector {
    double theta0;
    std::vector<double> marginal_shapes;

    ParameterVector() : theta0(1.0) {}
    ParameterVector(double theta0_, std::vector<double> shapes);

    std::size_t dimension() const { return marginal_shapes.size() + 1; }
    std::size_t sensor_count() const { return marginal_shapes.size(); }

    /// Flat view: component 0 is the copula parameter, then the shapes.
    std::vector<double> components() const;
    static ParameterVector from_components(std::span<const double> c);

    bool is_valid() const;
    void validate() const; // throws std::invalid_argument

    bool operator==(const ParameterVector&) const = default;
};

/// Joint distribution assembled from Gamma marginals and the copula.
/// Immutable after construction; cheap to copy.
class JointModel {
public:
    JointModel(std::vector<GammaMarginal> marginals, ClaytonCopula copula);

    /// Builds the model at the given parameters with per-sensor scales.
    static JointModel from_parameters(const ParameterVector& theta,
                                      std::span<const double> scales);

    /// Same scales, different free parameters.
    JointModel at(const ParameterVector& theta) const;

    std::size_t sensor_count() const { return marginals_.size(); }
    const std::vector<GammaMarginal>& marginals() const { return marginals_; }
    const GammaMarginal& marginal(std::size_t i) const { return marginals_[i]; }
    const ClaytonCopula& copula() const { return copula_; }
    std::vector<double> scales() const;

    ParameterVector parameters() const;

    /// Joint log pdf; -inf for points outside the support.
    double log_pdf(std::span<const double> y) const;
    double log_pdf(std::span<const double> y, const ParameterVector& theta) const;
    double pdf(std::span<const double> y) const;

    /// Joint CDF via the copula applied to the marginal CDFs.
    double cdf(std::span<const double> y) const;

private:
    std::vector<GammaMarginal> marginals_;
    ClaytonCopula copula_;
};

} // namespace qmle
