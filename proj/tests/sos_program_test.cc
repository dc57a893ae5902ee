#include "reachsos/sos_program.h"

#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "reachsos/certificate.h"
#include "reachsos/parser.h"
#include "test_util.h"

namespace reachsos {
namespace {

const Variable x("x");
const Variable y("y");
const Variable z("z");

long binomial(int n, int k) {
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

TEST(SosProgramTest, TemplateSizes) {
  SosProgram prog;
  EXPECT_EQ(prog.new_template({x}, 4).basis.size(), 5u);
  EXPECT_EQ(prog.new_template({x, y}, 2).basis.size(), 6u);
  EXPECT_EQ(static_cast<long>(prog.new_template({x, y, z}, 8).basis.size()),
            binomial(11, 3));
  EXPECT_EQ(prog.num_decisions(), 5 + 6 + 165);
}

TEST(SosProgramTest, ConstantExpression) {
  SosProgram prog;
  prog.add_sos(Polynomial(1.0));
  const SdpProblem sdp = prog.compile();
  ASSERT_EQ(sdp.block_dims, std::vector<int>{1});
  ASSERT_EQ(sdp.equalities.size(), 1u);
  EXPECT_DOUBLE_EQ(sdp.equalities[0].rhs, 1.0);
  const SdpSolution sol = solve_sdp(sdp);
  ASSERT_TRUE(sol.ok());
  EXPECT_NEAR(sol.blocks[0](0, 0), 1.0, 1e-8);
}

TEST(SosProgramTest, PerfectSquare) {
  SosProgram prog;
  prog.add_sos(parse_polynomial("x^2 + 2*x + 1"));
  const SdpProblem sdp = prog.compile();
  EXPECT_EQ(sdp.block_dims, std::vector<int>{2});
  EXPECT_EQ(sdp.equalities.size(), 3u);
  const SdpSolution sol = solve_sdp(sdp);
  ASSERT_TRUE(sol.ok()) << sol.message;
  EXPECT_NEAR(sol.blocks[0](0, 0), 1.0, 1e-6);
  EXPECT_NEAR(sol.blocks[0](0, 1), 1.0, 1e-6);
  EXPECT_NEAR(sol.blocks[0](1, 1), 1.0, 1e-6);
  EXPECT_NO_THROW(prog.check_identities(sol));
}

TEST(SosProgramTest, SumOfTwoSquaresGram) {
  SosProgram prog;
  prog.add_sos(parse_polynomial("x^2 + 1"));
  const SdpSolution sol = solve_sdp(prog.compile());
  ASSERT_TRUE(sol.ok());
  EXPECT_NEAR(sol.blocks[0](0, 0), 1.0, 1e-7);
  EXPECT_NEAR(sol.blocks[0](1, 1), 1.0, 1e-7);
  EXPECT_NEAR(sol.blocks[0](0, 1), 0.0, 1e-7);
}

TEST(SosProgramTest, NegativeQuarticIsNotSos) {
  SosProgram prog;
  prog.add_sos(parse_polynomial("x^4 - x^2"));
  const SdpSolution sol = solve_sdp(prog.compile());
  EXPECT_EQ(sol.status, SdpStatus::kInfeasible);
}

TEST(SosProgramTest, EmptyProgram) {
  SosProgram prog;
  const SdpProblem sdp = prog.compile();
  EXPECT_TRUE(sdp.block_dims.empty());
  EXPECT_EQ(solve_sdp(sdp).status, SdpStatus::kOptimal);
}

// The initial reach-avoid program for x⁺ = x + 0.01(−x − x² + u), u ~ U[−1,1].
SosProgram example_one_program(DecisionPoly* v_out) {
  const Polynomial h = parse_polynomial("x^2 - 1");
  const Polynomial g = parse_polynomial("x^2 - 0.01");
  const Polynomial hhat = parse_polynomial("x^2 - 1.0201");
  SosProgram prog;
  const DecisionPoly v = prog.new_template({x}, 4, 1000.0, "v");
  const SosPoly s1 = prog.new_sos_poly({x}, 8);
  const SosPoly s2 = prog.new_sos_poly({x}, 8);
  const SosPoly s3 = prog.new_sos_poly({x}, 8);
  const SosPoly s4 = prog.new_sos_poly({x}, 8);
  const Variable u("u");
  const Polynomial fx = parse_polynomial("x + 0.01*(-x - x^2 + u)");
  auto expect = [&](const Polynomial& b) {
    return integrate_var(compose(b, {{x, fx}}), u, -1.0, 1.0) * 0.5;
  };
  AffinePolynomial row1 = v.transformed(expect) - 1.01 * v.expr();
  row1.add_product(s1.value, h);
  row1.add_product(s2.value, g, -1.0);
  prog.add_sos(row1, "decrease");
  AffinePolynomial row2 = -1.0 * v.expr();
  row2.add_product(s3.value, hhat);
  row2.add_product(s4.value, h, -1.0);
  prog.add_sos(row2, "outside");
  *v_out = v;
  return prog;
}

TEST(SosProgramTest, ExampleOneCounts) {
  DecisionPoly v;
  const SosProgram prog = example_one_program(&v);
  const SdpProblem sdp = prog.compile();
  EXPECT_EQ(sdp.block_dims.size(), 6u);
  // Both rows have degree 10 in one variable; half-degree Gram bases of
  // size 6 generate exactly the exponents 0..10.
  std::set<int> row_exponents;
  for (int a = 0; a <= 5; ++a) {
    for (int b = a; b <= 5; ++b) row_exponents.insert(a + b);
  }
  EXPECT_EQ(sdp.equalities.size(), 2 * row_exponents.size());
  EXPECT_EQ(sdp.block_dims[4], 6);
  EXPECT_EQ(sdp.block_dims[5], 6);
}

TEST(SosProgramTest, CompileIsDeterministic) {
  DecisionPoly v1, v2;
  const SdpProblem a = example_one_program(&v1).compile();
  const SdpProblem b = example_one_program(&v2).compile();
  EXPECT_EQ(to_sparse_text(a), to_sparse_text(b));
}

TEST(SosProgramTest, IntervalMomentObjective) {
  SosProgram prog;
  const DecisionPoly v = prog.new_template({x}, 2);
  const SublevelSet interval({x}, {parse_polynomial("x^2 - 1")}, true);
  prog.set_objective_integral(v, interval, ObjectiveMode::kClosedForm);
  const auto& t = prog.objective().terms();
  EXPECT_NEAR(t.at(v.coeff_ids[0]), 2.0, 1e-14);
  EXPECT_EQ(t.count(v.coeff_ids[1]), 0u);
  EXPECT_NEAR(t.at(v.coeff_ids[2]), 2.0 / 3.0, 1e-14);
}

TEST(SosProgramTest, SampleWeightsAtOrigin) {
  const PointSet pts = PointSet::Zero(7, 1);
  const auto w = sample_weights(monomial_basis(std::vector<Variable>{x}, 2),
                                {x}, pts);
  EXPECT_EQ(w, (std::vector<double>{7.0, 0.0, 0.0}));
}

TEST(SosProgramTest, DiscMomentsAgreeWithSamples) {
  const SublevelSet disc({x, y}, {parse_polynomial("x^2 + y^2 - 1")}, true);
  const auto basis = monomial_basis(std::vector<Variable>{x, y}, 2);
  const auto closed = moment_weights(basis, disc);
  const int n = 1'000'000;
  auto sampled = sample_weights(basis, {x, y}, sample_uniform(disc, n, 3));
  const double scale = std::numbers::pi / n;
  const double top = *std::max_element(closed.begin(), closed.end());
  for (std::size_t j = 0; j < basis.size(); ++j) {
    EXPECT_NEAR(sampled[j] * scale, closed[j], 0.01 * top) << j;
  }
}

TEST(SosProgramTest, PerturbedGramIsRejected) {
  SosProgram prog;
  prog.add_sos(parse_polynomial("x^4 + 2*x^2 + 1"));
  SdpSolution sol = solve_sdp(prog.compile());
  ASSERT_TRUE(sol.ok());
  EXPECT_NO_THROW(prog.check_identities(sol));
  sol.blocks[0](1, 2) += 1e-2;
  sol.blocks[0](2, 1) += 1e-2;
  EXPECT_THROW(prog.check_identities(sol), ExtractionError);
}

TEST(SosProgramTest, ExampleOneSolvesAndExtracts) {
  DecisionPoly v;
  SosProgram prog = example_one_program(&v);
  const SublevelSet interval({x}, {parse_polynomial("x^2 - 1")}, true);
  prog.set_objective_integral(v, interval, ObjectiveMode::kClosedForm);
  const SdpSolution sol = solve_sdp(prog.compile());
  ASSERT_TRUE(sol.ok()) << sol.message;
  EXPECT_NO_THROW(prog.check_identities(sol));
  const Polynomial vv = prog.value(v, sol);
  EXPECT_LE(vv.degree(), 4);
  EXPECT_GT(vv.eval({{x, 0.5}}), 0.0);
}

TEST(SosProgramPropertyTest, GramSoundness) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    Polynomial p;
    for (int k = 0; k < 3; ++k) {
      const Polynomial q = test::random_polynomial(rng, {x, y}, 2, 1.0);
      p += q * q;
    }
    SosProgram prog;
    prog.add_sos(p);
    const SdpSolution sol = solve_sdp(prog.compile());
    ASSERT_TRUE(sol.ok()) << sol.message;
    prog.check_identities(sol);
    const auto& g = sol.blocks[0];
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues()(0),
              -1e-8);
    for (int i = 0; i < 1000; ++i) {
      const double a = unit(rng), b = unit(rng);
      const double r2 = a * a + b * b;
      EXPECT_GE(p.eval({{x, a}, {y, b}}), -1e-6 * (1.0 + r2 * r2));
    }
  }
}

TEST(LinearExprTest, Arithmetic) {
  LinearExpr a = LinearExpr::Decision(0, 2.0) + LinearExpr(1.0);
  LinearExpr b = LinearExpr::Decision(0, -2.0) + LinearExpr::Decision(3, 1.0);
  const LinearExpr c = a + b;
  EXPECT_EQ(c.terms().size(), 1u);
  EXPECT_DOUBLE_EQ(c.eval({0.0, 0.0, 0.0, 5.0}), 6.0);
  EXPECT_DOUBLE_EQ((2.0 * a).eval({1.5}), 8.0);
}

TEST(CertificateTest, JsonRoundTrip) {
  Certificate c;
  c.kind = CertificateKind::kReachAvoid;
  c.mode = ExpectationMode::kEpsGreedy;
  c.system = "ex1";
  c.v = parse_polynomial("0.123456789012345*x^4 - 1e-7*x + 3");
  c.lambda = 1.01;
  c.multipliers["s1"] = parse_polynomial("x^2 + 0.1");
  c.controller = {parse_polynomial("0.5*x")};
  c.epsilon = 0.5;
  c.delta = 0.1;
  c.xhat_h = parse_polynomial("x^2 - 1.0201");
  c.solve_status = "optimal";
  const auto j = to_json(c);
  const Certificate back = certificate_from_json(j);
  EXPECT_EQ(back.v, c.v);
  EXPECT_EQ(back.controller, c.controller);
  EXPECT_EQ(back.multipliers, c.multipliers);
  EXPECT_EQ(back.mode, c.mode);
  EXPECT_EQ(to_json(back), j);
  EXPECT_THROW(certificate_from_json(nlohmann::json{{"kind", "bogus"}}),
               std::invalid_argument);
}

}  // namespace
}  // namespace reachsos
