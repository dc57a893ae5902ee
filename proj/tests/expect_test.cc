#include "reachsos/expect.h"

#include <algorithm>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "reachsos/parser.h"
#include "test_util.h"

namespace reachsos {
namespace {

using boost::math::quadrature::gauss_kronrod;

const Variable x("x");
const Variable y("y");
const Variable u("u");
const Variable w("w");

Dynamics example_one() {
  Dynamics d;
  d.state_vars = {x};
  d.input_vars = {u};
  d.f = {parse_polynomial("x + 0.01*(-x - x^2 + u)")};
  return d;
}

double quad(const std::function<double(double)>& fn, double a, double b) {
  return gauss_kronrod<double, 31>::integrate(fn, a, b, 15, 1e-14);
}

// ∫ v(f(x,u)) ρ(u) du for the 1-input mixture density, by quadrature.
double mixture_oracle(const Polynomial& v, const Dynamics& d, double xv,
                      double eps, double delta, double u0, double lo,
                      double hi) {
  auto integrand = [&](double uv) {
    const Point pt{{x, xv}, {u, uv}};
    return v.eval({{x, d.f[0].eval(pt)}});
  };
  const double window = 2 * delta;
  const double Z = (1 - eps) * window + eps * (hi - lo);
  return ((1 - eps) * quad(integrand, u0 - delta, u0 + delta) +
          eps * quad(integrand, lo, hi)) /
         Z;
}

TEST(ExpectTest, LinearValueDropsZeroMeanInput) {
  const Polynomial e = expect_uniform(Polynomial(x), example_one(),
                                      BoxSet({-1.0}, {1.0}));
  const Polynomial expected = 0.99 * Polynomial(x) - 0.01 * Polynomial(x).pow(2);
  ASSERT_EQ(e.terms().size(), expected.terms().size());
  for (const auto& [m, c] : expected.terms()) {
    EXPECT_NEAR(e.coefficient(m), c, 1e-16);
  }
}

TEST(ExpectTest, ConstantIsPreserved) {
  EXPECT_EQ(expect_uniform(Polynomial(3.5), example_one(), BoxSet({-1.0}, {1.0})),
            Polynomial(3.5));
}

TEST(ExpectTest, UniformMatchesQuadrature) {
  const Dynamics d = example_one();
  const Polynomial v = Polynomial(x).pow(2);
  const Polynomial e = expect_uniform(v, d, BoxSet({-1.0}, {1.0}));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dx(-1.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const double xv = dx(rng);
    const double oracle = 0.5 * quad(
        [&](double uv) {
          return v.eval({{x, d.f[0].eval({{x, xv}, {u, uv}})}});
        },
        -1.0, 1.0);
    EXPECT_NEAR(e.eval({{x, xv}}), oracle, 1e-8);
  }
}

TEST(EpsGreedyParamsTest, NormalizationConstant) {
  const EpsGreedyParams p(0.5, 0.1, BoxSet({-1.0}, {1.0}));
  EXPECT_NEAR(p.Z(), 1.1, 1e-15);
}

TEST(EpsGreedyParamsTest, RejectsInvalidCombinations) {
  const BoxSet U({-1.0}, {1.0});
  EXPECT_THROW(EpsGreedyParams(0.0, 0.0, U), std::invalid_argument);
  EXPECT_THROW(EpsGreedyParams(0.5, 1.0, U), std::invalid_argument);
  EXPECT_THROW(EpsGreedyParams(1.5, 0.1, U), std::invalid_argument);
  EXPECT_THROW(EpsGreedyParams(0.5, 0.1, U, {}, 0.0), std::invalid_argument);
}

TEST(EpsGreedyParamsTest, ScheduleRecomputesZ) {
  EpsGreedyParams p(0.5, 0.1, BoxSet({-1.0}, {1.0}), {}, 0.8);
  p.advance_schedule();
  EXPECT_DOUBLE_EQ(p.epsilon(), 0.4);
  EXPECT_NEAR(p.Z(), 0.6 * 0.2 + 0.4 * 2.0, 1e-15);
  p.set_delta(0.2);
  EXPECT_NEAR(p.Z(), 0.6 * 0.4 + 0.4 * 2.0, 1e-15);
}

TEST(ExpectTest, EpsilonOneEqualsUniform) {
  const Dynamics d = example_one();
  const BoxSet U({-1.0}, {1.0});
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Polynomial v = test::random_polynomial(rng, {x}, 4);
    const Polynomial ctrl = test::random_polynomial(rng, {x}, 3) * 0.2;
    const EpsGreedyParams p(1.0, 0.1, U, {ctrl});
    EXPECT_EQ(expect_eps_greedy(v, d, p), expect_uniform(v, d, U));
  }
}

TEST(ExpectTest, EpsilonZeroIsWindowAverage) {
  const Dynamics d = example_one();
  const BoxSet U({-1.0}, {1.0});
  const Polynomial ctrl = 0.5 * Polynomial(x);
  const double delta = 0.1;
  const EpsGreedyParams p(0.0, delta, U, {ctrl});
  const Polynomial v = parse_polynomial("x^4 - 2*x^2 + x");
  const Polynomial e = expect_eps_greedy(v, d, p);
  const Polynomial composed = compose(v, d.successor_map());
  const Polynomial manual = integrate_var(composed, u, ctrl - delta, ctrl + delta) *
                            Polynomial(1.0 / (2 * delta));
  for (double xv : {-0.9, -0.3, 0.0, 0.4, 0.8}) {
    EXPECT_NEAR(e.eval({{x, xv}}), manual.eval({{x, xv}}), 1e-12);
  }
}

TEST(ExpectTest, MixtureMatchesQuadrature) {
  const Dynamics d = example_one();
  const BoxSet U({-1.0}, {1.0});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dx(-1.0, 1.0);
  const Polynomial ctrl = 0.5 * Polynomial(x);
  const EpsGreedyParams p(0.5, 0.1, U, {ctrl});
  const Polynomial v = test::random_polynomial(rng, {x}, 4, 1.0);
  const Polynomial e = expect_eps_greedy(v, d, p);
  for (int i = 0; i < 30; ++i) {
    const double xv = dx(rng);
    EXPECT_NEAR(e.eval({{x, xv}}),
                mixture_oracle(v, d, xv, 0.5, 0.1, 0.5 * xv, -1.0, 1.0), 1e-8);
  }
}

TEST(ExpectTest, RandomInstancesMatchQuadrature) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> eps_d(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Dynamics d;
    d.state_vars = {x};
    d.input_vars = {u};
    d.f = {test::random_polynomial(rng, {x, u}, 2, 1.0) * 0.5};
    const double lo = -1.0 - eps_d(rng);
    const double hi = 1.0 + eps_d(rng);
    const BoxSet U({lo}, {hi});
    const Polynomial v = test::random_polynomial(rng, {x}, 4, 1.0);
    const double gain = 0.3 * unit(rng);
    const double delta = 0.05 + 0.2 * eps_d(rng);
    const double eps = eps_d(rng);
    const EpsGreedyParams p(eps, delta, U, {gain * Polynomial(x)});
    const Polynomial eu = expect_uniform(v, d, U);
    const Polynomial em = expect_eps_greedy(v, d, p);
    const double xv = unit(rng);
    const double uniform_oracle =
        quad([&](double uv) {
          return v.eval({{x, d.f[0].eval({{x, xv}, {u, uv}})}});
        }, lo, hi) / (hi - lo);
    EXPECT_NEAR(eu.eval({{x, xv}}), uniform_oracle, 1e-8);
    EXPECT_NEAR(em.eval({{x, xv}}),
                mixture_oracle(v, d, xv, eps, delta, gain * xv, lo, hi), 1e-8);
  }
}

TEST(ExpectTest, TwoInputsMatchNestedQuadrature) {
  Dynamics d;
  d.state_vars = {x, y};
  d.input_vars = {u, w};
  d.f = {parse_polynomial("x + 0.1*(y + x*u)"),
         parse_polynomial("y + 0.1*(-(1 - x^2)*x - y + y*w)")};
  const BoxSet U({-0.5, -0.5}, {0.5, 0.5});
  const Polynomial v = parse_polynomial("x^2*y^2 + x^3 - y + 2*x*y^3");
  const std::vector<Polynomial> ctrl{0.2 * Polynomial(x), -0.1 * Polynomial(y)};
  const double delta = 0.1;
  const double eps = 0.3;
  const EpsGreedyParams p(eps, delta, U, ctrl);
  const Polynomial em = expect_eps_greedy(v, d, p);
  auto value = [&](double xv, double yv, double a, double b) {
    const Point pt{{x, xv}, {y, yv}, {u, a}, {w, b}};
    return v.eval({{x, d.f[0].eval(pt)}, {y, d.f[1].eval(pt)}});
  };
  auto box_integral = [&](double xv, double yv, double a0, double a1, double b0,
                          double b1) {
    return quad([&](double a) {
      return quad([&](double b) { return value(xv, yv, a, b); }, b0, b1);
    }, a0, a1);
  };
  for (auto [xv, yv] : {std::pair{0.3, -0.4}, std::pair{-0.7, 0.2}}) {
    const double u0 = 0.2 * xv, w0 = -0.1 * yv;
    const double Z = (1 - eps) * 0.04 + eps * 1.0;
    const double oracle =
        ((1 - eps) * box_integral(xv, yv, u0 - delta, u0 + delta, w0 - delta,
                                  w0 + delta) +
         eps * box_integral(xv, yv, -0.5, 0.5, -0.5, 0.5)) /
        Z;
    EXPECT_NEAR(em.eval({{x, xv}, {y, yv}}), oracle, 1e-8);
  }
}

TEST(ExpectTest, MixtureOfConstantIsExactlyOne) {
  const Dynamics d = example_one();
  for (double eps : {0.0, 0.25, 0.5, 1.0}) {
    const EpsGreedyParams p(eps, 0.1, BoxSet({-1.0}, {1.0}),
                            {parse_polynomial("0.3*x - 0.2*x^2")});
    EXPECT_EQ(expect_eps_greedy(Polynomial(1.0), d, p), Polynomial(1.0));
  }
}

TEST(ExpectTest, Linearity) {
  const Dynamics d = example_one();
  std::mt19937_64 rng(5);
  const EpsGreedyParams p(0.4, 0.1, BoxSet({-1.0}, {1.0}),
                          {parse_polynomial("0.3*x")});
  const Polynomial v1 = test::random_polynomial(rng, {x}, 4, 1.0);
  const Polynomial v2 = test::random_polynomial(rng, {x}, 4, 1.0);
  const double a = 1.7, b = -0.6;
  const Polynomial lhs = expect_eps_greedy(a * v1 + b * v2, d, p);
  const Polynomial rhs =
      a * expect_eps_greedy(v1, d, p) + b * expect_eps_greedy(v2, d, p);
  for (const auto& [m, c] : lhs.terms()) {
    EXPECT_NEAR(rhs.coefficient(m), c, 1e-10);
  }
  for (const auto& [m, c] : rhs.terms()) {
    EXPECT_NEAR(lhs.coefficient(m), c, 1e-10);
  }
}

TEST(ExpectTest, DominatedByMaximumOverInputs) {
  const Dynamics d = example_one();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> dx(-1.0, 1.0);
  const Polynomial ctrl = parse_polynomial("0.5*x - 0.3*x^3");
  const EpsGreedyParams p(0.3, 0.1, BoxSet({-1.0}, {1.0}), {ctrl});
  const Polynomial v = test::random_polynomial(rng, {x}, 4, 1.0);
  const Polynomial e = expect_eps_greedy(v, d, p);
  const Polynomial vf = compose(v, d.successor_map());
  const PolyEvaluator vf_eval(vf, std::vector<Variable>{x, u});
  for (int i = 0; i < 1000; ++i) {
    const double xv = dx(rng);
    double best = -1e300;
    for (int k = 0; k <= 2000; ++k) {
      const double z[] = {xv, -1.0 + k * 1e-3};
      best = std::max(best, vf_eval(z));
    }
    EXPECT_GE(best, e.eval({{x, xv}}) - 1e-8);
  }
}

TEST(ExpectTest, GreedySubstitutesController) {
  const Dynamics d = example_one();
  const Polynomial ctrl = parse_polynomial("0.5*x");
  const Polynomial v = parse_polynomial("x^2");
  const Polynomial g = expect_greedy(v, d, {ctrl});
  for (double xv : {-0.5, 0.2, 0.9}) {
    const double next = d.f[0].eval({{x, xv}, {u, 0.5 * xv}});
    EXPECT_NEAR(g.eval({{x, xv}}), next * next, 1e-14);
  }
}

}  // namespace
}  // namespace reachsos
