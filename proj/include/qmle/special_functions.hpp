#pragma once

namespace qmle::special {

/// Regularized lower incomplete gamma P(a, x). Exact 0 at x = 0, saturates
/// to exact 1 once the upper tail underflows.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

/// Standard normal quantile (Acklam's rational approximation, ~1e-9
/// relative). Used only to seed Newton iterations.
double standard_normal_quantile(double p);

} // namespace qmle::special
