#include "catgen/special.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <doctest.h>

#include <cmath>

using namespace catgen::special;

namespace {

// Upper tail of the F density by numerical quadrature, independent of the
// continued fraction under test.
double f_tail_quadrature(double f, double d1, double d2) {
  const double log_norm = std::lgamma((d1 + d2) / 2) - std::lgamma(d1 / 2) - std::lgamma(d2 / 2) +
                          (d1 / 2) * std::log(d1 / d2);
  auto density = [&](double u) {
    const double x = f + u;
    return std::exp(log_norm + (d1 / 2 - 1) * std::log(x) - ((d1 + d2) / 2) * std::log1p(d1 * x / d2));
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate(density);
}

}  // namespace

TEST_SUITE("special") {
  TEST_CASE("incomplete beta matches reference values") {
    CHECK(incomplete_beta(2.5, 1.5, 0.3) == doctest::Approx(0.08894372317066562).epsilon(1e-12));
    CHECK(incomplete_beta(0.5, 0.5, 0.9) == doctest::Approx(0.7951672353008665).epsilon(1e-12));
    CHECK(incomplete_beta(10, 20, 0.4) == doctest::Approx(0.7853183897628262).epsilon(1e-12));
    CHECK(incomplete_beta(1, 1, 0.37) == doctest::Approx(0.37).epsilon(1e-14));
  }

  TEST_CASE("incomplete beta endpoints and symmetry") {
    CHECK(incomplete_beta(3, 4, 0.0) == 0.0);
    CHECK(incomplete_beta(3, 4, 1.0) == 1.0);
    for (double x : {0.1, 0.5, 0.8}) {
      CHECK(incomplete_beta(2.2, 3.7, x) + incomplete_beta(3.7, 2.2, 1 - x) == doctest::Approx(1.0).epsilon(1e-13));
    }
  }

  TEST_CASE("F survival matches reference values") {
    CHECK(f_survival(3.2, 2, 17) == doctest::Approx(0.06614256666642138).epsilon(1e-11));
    CHECK(f_survival(0.5, 1, 10) == doctest::Approx(0.49564750438311955).epsilon(1e-11));
    CHECK(f_survival(10, 3, 40) == doctest::Approx(4.780015174534412e-05).epsilon(1e-10));
    CHECK(f_survival(1, 5, 5) == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("F survival agrees with direct quadrature") {
    for (double d1 : {1.0, 2.0, 3.0}) {
      for (double d2 : {8.0, 23.0, 60.0}) {
        for (double f : {0.3, 1.7, 6.0, 40.0}) {
          CAPTURE(d1);
          CAPTURE(d2);
          CAPTURE(f);
          CHECK(f_survival(f, d1, d2) == doctest::Approx(f_tail_quadrature(f, d1, d2)).epsilon(1e-8));
        }
      }
    }
  }

  TEST_CASE("F survival boundaries") {
    CHECK(f_survival(0.0, 2, 10) == 1.0);
    CHECK(f_survival(1e12, 2, 10) < 1e-20);
  }
}
