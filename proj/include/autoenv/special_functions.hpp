#pragma once

// Regularized incomplete beta and gamma functions and the distribution tails
// built on them. Absolute accuracy about 1e-10 or better.

namespace autoenv::stats {

/// I_x(a, b) for a, b > 0 and x in [0, 1]; continued fraction (modified Lentz).
[[nodiscard]] double incomplete_beta(double a, double b, double x);

/// P(a, x) and Q(a, x) = 1 - P for a > 0, x >= 0; series for x < a + 1, else continued fraction.
[[nodiscard]] double gamma_p(double a, double x);
[[nodiscard]] double gamma_q(double a, double x);

/// Two-sided tail P(|T| >= |t|) of Student's t with df > 0 degrees of freedom.
[[nodiscard]] double student_t_two_sided(double t, double df);

/// Upper tail P(X >= x) of chi-squared with k > 0 degrees of freedom.
[[nodiscard]] double chi_squared_sf(double x, double k);

}  // namespace autoenv::stats
