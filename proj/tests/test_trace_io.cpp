#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "sgfd/momentum.hpp"
#include "sgfd/problems.hpp"
#include "sgfd/runner.hpp"
#include "sgfd/trace_io.hpp"

using namespace sgfd;

namespace {

std::filesystem::path temp_file(const std::string& tag) {
  return std::filesystem::temp_directory_path() /
         ("sgfd-trace-" + tag + "-" + std::to_string(::getpid()) + ".csv");
}

struct FileGuard {
  std::filesystem::path path;
  ~FileGuard() { std::filesystem::remove(path); }
};

RunConfig small_config(int d, std::uint64_t seed) {
  RunConfig config;
  config.variant = StepVariant{StepKind::kSingleSample, 1, 1};
  config.schedule = StepsizeSchedule::robbins_monro(2.0, 60.0);
  config.directions = DirectionDistribution{DirectionLaw::kUniformSymmetric, d};
  config.iterations = 40;
  config.replications = 2;
  config.seed = seed;
  config.record_stride = 10;
  return config;
}

TraceTable round_trip(const Trace& trace) {
  std::istringstream in(format_trace_csv(trace));
  return parse_trace_csv(in);
}

bool same_bits(double a, double b) {
  return format_double(a) == format_double(b);
}

}  // namespace

TEST_CASE("plain run round-trips bit-for-bit") {
  std::mt19937_64 rng(11);
  const auto problem = make_quadratic(spaced_eigenvalues(3, 10.0), 1.0, rng);
  const auto trace = run_sgfd(problem, small_config(3, 900));
  REQUIRE(trace.rows.size() == 4);

  const auto table = round_trip(trace);
  REQUIRE(table.rows() == 4);
  CHECK(table.replications == 2);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const auto& row = trace.rows[i];
    CHECK(table.k[i] == row.k);
    CHECK(same_bits(table.alpha[i], row.alpha));
    REQUIRE(row.mean_gap.has_value());  // F* is known for the quadratic
    CHECK(same_bits(table.mean_gap[i], *row.mean_gap));
    CHECK(same_bits(table.mean_grad_sq[i], row.mean_grad_sq));
    CHECK_FALSE(table.var_mk[i].has_value());  // plain runs have no var column
  }
}

TEST_CASE("momentum run round-trips including the variance column") {
  std::mt19937_64 rng(12);
  const auto problem = make_quadratic(spaced_eigenvalues(2, 5.0), 1.0, rng);
  auto config = small_config(2, 901);
  config.iterations = 20;
  config.replications = 3;
  config.record_stride = 5;
  config.schedule = StepsizeSchedule::robbins_monro(5.0, 150.0);
  MomentumOptions options;
  options.decay = DecaySchedule::changing(2.0);
  const auto trace = run_accelerated(problem, config, options);
  REQUIRE(trace.rows.size() == 4);

  const auto table = round_trip(trace);
  REQUIRE(table.rows() == 4);
  CHECK(table.replications == 3);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    REQUIRE(trace.rows[i].var_direction.has_value());
    REQUIRE(table.var_mk[i].has_value());
    CHECK(same_bits(*table.var_mk[i], *trace.rows[i].var_direction));
  }
}

TEST_CASE("awkward doubles survive format and reparse") {
  for (double v : {1.0 / 3.0, 0.1, 1e-300, 1.7976931348623157e308, -0.0,
                   -2.5e-17, 123456789.123456789}) {
    const std::string text = format_double(v);
    char* end = nullptr;
    const double back = std::strtod(text.c_str(), &end);
    CHECK(end == text.c_str() + text.size());
    CHECK(back == v);
    CHECK(std::signbit(back) == std::signbit(v));
  }
}

TEST_CASE("gap column falls back to the raw objective when no optimum is known") {
  Trace trace;
  trace.replications = 1;
  TraceRow row;
  row.k = 1;
  row.alpha = 0.5;
  row.mean_objective = 7.25;
  row.mean_gap = std::nullopt;
  row.mean_grad_sq = 2.0;
  trace.rows.push_back(row);

  const auto table = round_trip(trace);
  REQUIRE(table.rows() == 1);
  CHECK(table.mean_gap[0] == 7.25);
}

TEST_CASE("file write and reparse round-trip") {
  std::mt19937_64 rng(13);
  const auto problem = make_quadratic(spaced_eigenvalues(2, 4.0), 0.5, rng);
  const auto trace = run_sgfd(problem, small_config(2, 902));

  FileGuard guard{temp_file("roundtrip")};
  write_trace_csv(trace, guard.path.string());
  const auto table = parse_trace_csv_file(guard.path.string());
  REQUIRE(table.rows() == trace.rows.size());
  for (std::size_t i = 0; i < table.rows(); ++i)
    CHECK(same_bits(table.mean_gap[i], *trace.rows[i].mean_gap));

  CHECK_THROWS_WITH_AS(
      parse_trace_csv_file((guard.path / "missing").string()),
      doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("carriage returns and blank lines are tolerated") {
  std::istringstream in(
      "k,alpha_k,mean_gap,mean_grad_sq,var_mk,replications\r\n"
      "1,0.5,2.0,4.0,,3\r\n"
      "\r\n"
      "2,0.25,1.0,2.0,0.125,3\r\n");
  const auto table = parse_trace_csv(in);
  REQUIRE(table.rows() == 2);
  CHECK(table.k[0] == 1);
  CHECK(table.alpha[1] == 0.25);
  CHECK_FALSE(table.var_mk[0].has_value());
  CHECK(table.var_mk[1].has_value());
  CHECK(*table.var_mk[1] == 0.125);
  CHECK(table.replications == 3);
}

TEST_CASE("malformed input is rejected with a line number") {
  auto parse_text = [](const std::string& text) {
    std::istringstream in(text);
    return parse_trace_csv(in);
  };
  const std::string header =
      "k,alpha_k,mean_gap,mean_grad_sq,var_mk,replications\n";

  SUBCASE("empty input") {
    CHECK_THROWS_WITH_AS(parse_text(""), doctest::Contains("missing header"),
                         std::runtime_error);
  }
  SUBCASE("wrong header") {
    CHECK_THROWS_WITH_AS(parse_text("k,alpha,gap\n1,2,3\n"),
                         doctest::Contains("unexpected header"),
                         std::runtime_error);
  }
  SUBCASE("missing field") {
    CHECK_THROWS_WITH_AS(parse_text(header + "1,0.5,2.0,4.0,\n"),
                         doctest::Contains("expected 6 fields, found 5"),
                         std::runtime_error);
  }
  SUBCASE("trailing junk in a number") {
    CHECK_THROWS_WITH_AS(parse_text(header + "1,1.5x,2.0,4.0,,3\n"),
                         doctest::Contains("malformed number '1.5x'"),
                         std::runtime_error);
  }
  SUBCASE("non-numeric field") {
    CHECK_THROWS_WITH_AS(parse_text(header + "1,0.5,abc,4.0,,3\n"),
                         doctest::Contains("malformed number 'abc'"),
                         std::runtime_error);
  }
  SUBCASE("empty required field") {
    CHECK_THROWS_WITH_AS(parse_text(header + "1,0.5,,4.0,,3\n"),
                         doctest::Contains("empty numeric field"),
                         std::runtime_error);
  }
  SUBCASE("non-integer iteration index") {
    CHECK_THROWS_WITH_AS(parse_text(header + "1.5,0.5,2.0,4.0,,3\n"),
                         doctest::Contains("malformed integer"),
                         std::runtime_error);
  }
  SUBCASE("replication count changes mid-file") {
    CHECK_THROWS_WITH_AS(
        parse_text(header + "1,0.5,2.0,4.0,,3\n2,0.25,1.0,2.0,,4\n"),
        doctest::Contains("line 3: replication count changed"),
        std::runtime_error);
  }
  SUBCASE("line numbers point at the offending row") {
    try {
      parse_text(header + "1,0.5,2.0,4.0,,3\n2,bad,1.0,2.0,,3\n");
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
}
