#include "reachsos/parser.h"

#include <cstdio>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "reachsos/system_spec.h"
#include "test_util.h"

namespace reachsos {
namespace {

const Variable x("x");
const Variable y("y");
const Variable u("u");

std::string benchmark(const std::string& name) {
  return std::string(REACHSOS_SOURCE_DIR) + "/benchmarks/" + name + ".json";
}

std::string write_temp(const std::string& name, const std::string& body) {
  const std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << body;
  return path;
}

TEST(ParserTest, ExampleDynamicsExpands) {
  const Polynomial p = parse_polynomial("x + 0.01*(-x - x^2 + u)", {"x", "u"});
  const Polynomial expected =
      0.99 * Polynomial(x) - 0.01 * Polynomial(x).pow(2) + 0.01 * Polynomial(u);
  ASSERT_EQ(p.terms().size(), expected.terms().size());
  for (const auto& [m, c] : expected.terms()) {
    EXPECT_NEAR(p.coefficient(m), c, 1e-16);
  }
}

TEST(ParserTest, SimpleDifference) {
  EXPECT_EQ(parse_polynomial("x^2 - 1"), Polynomial(x).pow(2) - 1.0);
}

TEST(ParserTest, UnbalancedParenthesisReportsPosition) {
  try {
    parse_polynomial("x + (y");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 6u);
  }
}

TEST(ParserTest, RejectsUnknownVariable) {
  EXPECT_THROW(parse_polynomial("x + z", {"x"}), ParseError);
}

TEST(ParserTest, RejectsBadExponents) {
  EXPECT_THROW(parse_polynomial("x^-1"), ParseError);
  EXPECT_THROW(parse_polynomial("x^2.5"), ParseError);
  EXPECT_THROW(parse_polynomial("x^y"), ParseError);
}

TEST(ParserTest, PrecedenceAndUnaryMinus) {
  EXPECT_EQ(parse_polynomial("-x^2"), -Polynomial(x).pow(2));
  EXPECT_EQ(parse_polynomial("2*x^2*y"), 2.0 * Polynomial(x).pow(2) * y);
  EXPECT_EQ(parse_polynomial("(x+1)^2"), Polynomial(x).pow(2) + 2.0 * Polynomial(x) + 1.0);
  EXPECT_EQ(parse_polynomial("x/4"), 0.25 * Polynomial(x));
  EXPECT_THROW(parse_polynomial("1/x"), ParseError);
  EXPECT_EQ(parse_polynomial("1.5e-2*x"), 0.015 * Polynomial(x));
}

TEST(ParserTest, RenderRoundTrip) {
  std::mt19937_64 rng(11);
  const std::vector<Variable> vars{x, y, u};
  for (int trial = 0; trial < 20; ++trial) {
    Polynomial p = test::random_polynomial(rng, vars, 5);
    p *= Polynomial(std::pow(10.0, trial % 7 - 3));
    const Polynomial back = parse_polynomial(render(p));
    EXPECT_EQ(back, p) << render(p);
  }
}

TEST(SystemSpecTest, LoadsExampleOne) {
  const SystemSpec spec = load_system(benchmark("ex1"));
  EXPECT_EQ(spec.dynamics.num_states(), 1);
  EXPECT_EQ(spec.dynamics.num_inputs(), 1);
  EXPECT_DOUBLE_EQ(spec.lambda, 1.01);
  EXPECT_EQ(spec.safe_h, Polynomial(x).pow(2) - 1.0);
  EXPECT_EQ(spec.input_box.lower, std::vector<double>{-1.0});
}

TEST(SystemSpecTest, LoadsVanderPol) {
  const SystemSpec spec = load_system(benchmark("vanderpol"));
  EXPECT_EQ(spec.dynamics.num_states(), 2);
  EXPECT_EQ(spec.dynamics.num_inputs(), 1);
  EXPECT_EQ(spec.input_box.lower, std::vector<double>{-3.0});
  EXPECT_EQ(spec.input_box.upper, std::vector<double>{3.0});
}

TEST(SystemSpecTest, LoadsEveryBenchmark) {
  for (const char* name : {"ex1", "vanderpol", "xue2021", "tan2008",
                           "moore_greitzer", "predator_prey", "vanderpol3d",
                           "model4d", "model6d"}) {
    EXPECT_NO_THROW(load_system(benchmark(name))) << name;
  }
  for (const char* name : {"safe1", "safe5", "safe6", "lorenz12"}) {
    EXPECT_NO_THROW(load_safety(benchmark(name))) << name;
  }
}

TEST(SystemSpecTest, RejectsSmallLambda) {
  auto j = read_json_file(benchmark("ex1"));
  j["lambda"] = 0.9;
  const std::string path = write_temp("lambda.json", j.dump());
  try {
    load_system(path);
    FAIL() << "expected rejection";
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda must exceed 1"),
              std::string::npos);
  }
}

TEST(SystemSpecTest, RejectsSchemaViolations) {
  auto j = read_json_file(benchmark("ex1"));
  j.erase("safe_h");
  EXPECT_THROW(system_from_json(j), SpecError);
  j = read_json_file(benchmark("ex1"));
  j["dynamics"] = {"x + w"};
  EXPECT_THROW(system_from_json(j), SpecError);
  j = read_json_file(benchmark("ex1"));
  j["input_lower"] = {2.0};
  EXPECT_THROW(system_from_json(j), SpecError);
  EXPECT_THROW(load_system("/nonexistent/file.json"), SpecError);
}

TEST(SystemSpecTest, RejectsTargetOutsideSafeSet) {
  auto j = read_json_file(benchmark("ex1"));
  j["target_g"] = "(x - 0.95)^2 - 0.01";
  EXPECT_THROW(validate_spec(system_from_json(j)), SpecError);
}

TEST(SystemSpecTest, RejectsOverlappingSafetySets) {
  auto j = read_json_file(benchmark("safe1"));
  j["unsafe_hU"] = {"(x - 17.5)*(x - 30)", "(y - 17.5)*(y - 30)"};
  try {
    validate_spec(safety_from_json(j));
    FAIL() << "expected rejection";
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("witness"), std::string::npos);
  }
}

TEST(SystemSpecTest, SerializationRoundTrip) {
  for (const char* name : {"ex1", "vanderpol", "tan2008"}) {
    const SystemSpec a = system_from_json(read_json_file(benchmark(name)));
    const auto ja = to_json(a);
    const SystemSpec b = system_from_json(ja);
    EXPECT_EQ(to_json(b), ja);
    EXPECT_EQ(b.dynamics.f, a.dynamics.f);
    EXPECT_EQ(b.safe_h, a.safe_h);
    EXPECT_EQ(b.target_g, a.target_g);
  }
  const SafetySpec s = safety_from_json(read_json_file(benchmark("lorenz12")));
  EXPECT_EQ(to_json(safety_from_json(to_json(s))), to_json(s));
}

TEST(SolveConfigTest, Validation) {
  SolveConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.deg_v = 3;
  EXPECT_THROW(cfg.validate(), SpecError);
  cfg.deg_v = 4;
  cfg.coeff_bound = 0;
  EXPECT_THROW(cfg.validate(), SpecError);
}

}  // namespace
}  // namespace reachsos
