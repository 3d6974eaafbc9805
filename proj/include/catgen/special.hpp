#pragma once

namespace catgen::special {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
/// Continued-fraction evaluation (modified Lentz), using the symmetry
/// I_x(a, b) = 1 - I_{1-x}(b, a) on the side where the fraction converges fast.
double incomplete_beta(double a, double b, double x);

/// P(F > f) for F ~ F(d1, d2).
double f_survival(double f, double d1, double d2);

}  // namespace catgen::special
