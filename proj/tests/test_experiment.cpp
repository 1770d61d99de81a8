#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "sgfd/experiment.hpp"
#include "sgfd/trace_io.hpp"

using namespace sgfd;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto path = std::filesystem::temp_directory_path() /
              ("sgfd-exp-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(path);
  return path;
}

struct DirGuard {
  std::filesystem::path path;
  ~DirGuard() { std::filesystem::remove_all(path); }
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// A small, feasible quadratic combination used by several cases.
std::string quad_section(const std::string& name, const std::string& seed) {
  return "[" + name + "]\n" +
         "problem = quadratic\n"
         "dimension = 3\n"
         "condition = 10\n"
         "optimizer = sgfd\n"
         "beta = 2\n"
         "sigma = 60\n"
         "iterations = 100\n"
         "replications = 2\n"
         "stride = 10\n"
         "seed = " +
         seed + "\n";
}

ExperimentSpec parse(const std::string& text) {
  return parse_experiment_text(text, "test-spec");
}

}  // namespace

TEST_CASE("spec text parses into typed combinations") {
  const std::string text =
      "# full-surface example\n"
      "output_dir = results/batch1  # trailing comment\n"
      "\n"
      "[quad-momentum]\n"
      "problem = quadratic\n"
      "dimension = 4\n"
      "condition = 8\n"
      "noise_sd = 0.5\n"
      "optimizer = momentum\n"
      "variant = paired-sample-direction\n"
      "batch = 2\n"
      "directions = normal\n"
      "schedule = robbins-monro\n"
      "beta = 5\n"
      "sigma = 150\n"
      "iterations = 200\n"
      "replications = 3\n"
      "seed = 42\n"
      "stride = 10\n"
      "x1 = 0.5, -1.25, 3, 0\n"
      "decay = fixed\n"
      "gamma = 0.85\n"
      "frozen = true\n"
      "clip_radius = 9.5\n"
      "\n"
      "[logit-fixed]\n"
      "problem = logistic\n"
      "samples = 50\n"
      "dimension = 6\n"
      "l2 = 0.1\n"
      "optimizer = sgfd\n"
      "schedule = fixed\n"
      "alpha = 0.01\n"
      "iterations = 50\n"
      "replications = 1\n"
      "seed = 43\n"
      "\n"
      "[valley]\n"
      "problem = rosenbrock\n"
      "dimension = 2\n"
      "optimizer = sgfd\n"
      "schedule = inverse-square\n"
      "beta = 0.25\n"
      "iterations = 50\n"
      "replications = 1\n"
      "seed = 44\n";

  const auto spec = parse(text);
  CHECK(spec.output_dir == "results/batch1");
  REQUIRE(spec.combinations.size() == 3);

  const auto& a = spec.combinations[0];
  CHECK(a.name == "quad-momentum");
  CHECK(a.problem_kind == "quadratic");
  CHECK(a.dimension == 4);
  CHECK(a.condition == 8.0);
  CHECK(a.noise_sd == 0.5);
  CHECK(a.optimizer == "momentum");
  CHECK(a.variant.kind == StepKind::kPairedSampleDirection);
  CHECK(a.variant.batch_size == 2);
  CHECK(a.variant.inner_batch == 1);
  CHECK(a.law == DirectionLaw::kStandardNormal);
  CHECK(a.schedule.kind == ScheduleKind::kRobbinsMonro);
  CHECK(a.schedule.beta == 5.0);
  CHECK(a.schedule.sigma == 150.0);
  CHECK(a.iterations == 200);
  CHECK(a.replications == 3);
  CHECK(a.seed == 42);
  CHECK(a.stride == 10);
  REQUIRE(a.x1.has_value());
  CHECK(*a.x1 == Vec{0.5, -1.25, 3.0, 0.0});
  CHECK(a.momentum.decay.kind == DecayKind::kFixed);
  CHECK(a.momentum.decay.gamma == 0.85);
  CHECK(a.momentum.frozen_trajectory);
  REQUIRE(a.momentum.clip_radius.has_value());
  CHECK(*a.momentum.clip_radius == 9.5);

  const auto& b = spec.combinations[1];
  CHECK(b.problem_kind == "logistic");
  CHECK(b.synthetic_samples == 50);
  CHECK(b.dimension == 6);
  CHECK(b.l2 == 0.1);
  CHECK(b.schedule.kind == ScheduleKind::kFixed);
  CHECK(b.schedule.alpha_bar == 0.01);
  // Unset keys fall back to documented defaults.
  CHECK(b.variant.kind == StepKind::kSingleSample);
  CHECK(b.law == DirectionLaw::kUniformSymmetric);
  CHECK(b.stride == 1);
  CHECK_FALSE(b.x1.has_value());
  CHECK(b.momentum.decay.kind == DecayKind::kChanging);
  CHECK(b.momentum.decay.p == 2.0);
  CHECK_FALSE(b.momentum.frozen_trajectory);

  const auto& c = spec.combinations[2];
  CHECK(c.schedule.kind == ScheduleKind::kInverseSquare);
  CHECK(c.schedule.beta == 0.25);
}

TEST_CASE("spec parse errors name the section, key, and line") {
  const std::string base = "output_dir = out\n";

  SUBCASE("unknown key") {
    CHECK_THROWS_WITH_AS(
        parse(base + quad_section("q", "1") + "bogus = 1\n"),
        doctest::Contains("unknown key 'bogus'"), std::invalid_argument);
  }
  SUBCASE("unknown prelude key") {
    CHECK_THROWS_WITH_AS(parse("outputdir = out\n"),
                         doctest::Contains("unknown prelude key"),
                         std::invalid_argument);
  }
  SUBCASE("duplicate key") {
    CHECK_THROWS_WITH_AS(
        parse(base + quad_section("q", "1") + "dimension = 5\n"),
        doctest::Contains("duplicate key 'dimension'"), std::invalid_argument);
  }
  SUBCASE("duplicate section") {
    CHECK_THROWS_WITH_AS(
        parse(base + quad_section("q", "1") + quad_section("q", "2")),
        doctest::Contains("duplicate section [q]"), std::invalid_argument);
  }
  SUBCASE("bad section name characters") {
    CHECK_THROWS_WITH_AS(parse(base + "[bad name]\n"),
                         doctest::Contains("may only use letters"),
                         std::invalid_argument);
  }
  SUBCASE("unterminated section header") {
    CHECK_THROWS_WITH_AS(parse(base + "[oops\n"),
                         doctest::Contains("unterminated section header"),
                         std::invalid_argument);
  }
  SUBCASE("line without an equals sign") {
    CHECK_THROWS_WITH_AS(parse(base + "[q]\njust words\n"),
                         doctest::Contains("expected 'key = value'"),
                         std::invalid_argument);
  }
  SUBCASE("missing required key") {
    std::string section = quad_section("q", "1");
    const auto pos = section.find("iterations = 100\n");
    REQUIRE(pos != std::string::npos);
    section.erase(pos, std::string("iterations = 100\n").size());
    CHECK_THROWS_WITH_AS(parse(base + section),
                         doctest::Contains("missing required key 'iterations'"),
                         std::invalid_argument);
  }
  SUBCASE("non-numeric value") {
    std::string section = quad_section("q", "1");
    const auto pos = section.find("dimension = 3");
    section.replace(pos, std::string("dimension = 3").size(),
                    "dimension = three");
    CHECK_THROWS_WITH_AS(parse(base + section),
                         doctest::Contains("'three' is not an integer"),
                         std::invalid_argument);
  }
  SUBCASE("negative seed") {
    CHECK_THROWS_WITH_AS(parse(base + quad_section("q", "-5")),
                         doctest::Contains("not an unsigned integer"),
                         std::invalid_argument);
  }
  SUBCASE("bad boolean") {
    CHECK_THROWS_WITH_AS(
        parse(base + quad_section("q", "1") + "frozen = yes\n"),
        doctest::Contains("'true' or 'false'"), std::invalid_argument);
  }
  SUBCASE("bad x1 entry") {
    CHECK_THROWS_WITH_AS(
        parse(base + quad_section("q", "1") + "x1 = 1.0, oops, 2.0\n"),
        doctest::Contains("comma-separated"), std::invalid_argument);
  }
  SUBCASE("error message carries origin and line number") {
    try {
      parse(base + "[q]\njust words\n");
      FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("test-spec:3") != std::string::npos);
    }
  }
}

TEST_CASE("validation rejects bad combinations and names the section") {
  SUBCASE("infeasible fixed stepsize") {
    std::string text = "output_dir = out\n" + quad_section("toobig", "1");
    const auto pos = text.find("beta = 2\nsigma = 60\n");
    text.replace(pos, std::string("beta = 2\nsigma = 60\n").size(),
                 "schedule = fixed\nalpha = 0.5\n");
    const auto spec = parse(text);
    CHECK_THROWS_WITH_AS(validate_experiment(spec),
                         doctest::Contains("section [toobig]"),
                         std::invalid_argument);
  }
  SUBCASE("shared seeds") {
    const auto spec = parse("output_dir = out\n" + quad_section("a", "7") +
                            quad_section("b", "7"));
    CHECK_THROWS_WITH_AS(validate_experiment(spec),
                         doctest::Contains("share seed 7"),
                         std::invalid_argument);
  }
  SUBCASE("momentum needs the stronger stepsize growth condition") {
    // beta = 2 satisfies the plain condition beta > 1/l but not the
    // momentum condition beta > 4/l.
    std::string text = "output_dir = out\n" + quad_section("slow", "9");
    const auto pos = text.find("optimizer = sgfd");
    text.replace(pos, std::string("optimizer = sgfd").size(),
                 "optimizer = momentum");
    CHECK_THROWS_WITH_AS(validate_experiment(parse(text)),
                         doctest::Contains("4/l"), std::invalid_argument);
  }
  SUBCASE("x1 of the wrong dimension") {
    const auto spec = parse("output_dir = out\n" + quad_section("short", "9") +
                            "x1 = 1.0, 2.0\n");
    CHECK_THROWS_WITH_AS(validate_experiment(spec),
                         doctest::Contains("section [short]"),
                         std::invalid_argument);
  }
  SUBCASE("stride that does not divide the iteration count") {
    std::string text = "output_dir = out\n" + quad_section("odd", "1");
    const auto pos = text.find("stride = 10");
    text.replace(pos, std::string("stride = 10").size(), "stride = 7");
    CHECK_THROWS_WITH_AS(validate_experiment(parse(text)),
                         doctest::Contains("section [odd]"),
                         std::invalid_argument);
  }
}

TEST_CASE("experiment run emits parseable artifacts with the declared shape") {
  DirGuard out{temp_dir("shape")};
  const auto spec =
      parse("output_dir = " + out.path.string() + "\n" +
            quad_section("quad", "7001"));
  validate_experiment(spec);
  const auto report = run_experiment(spec);

  REQUIRE(report.results.size() == 1);
  const auto& result = report.results[0];
  CHECK_FALSE(result.diverged);
  CHECK(result.csv_name == "quad.csv");
  CHECK(result.optimizer == "sgfd");
  CHECK(result.variant_name == std::string("single-sample"));
  REQUIRE(result.rate.has_value());
  CHECK(result.rate_window.first == 10);
  CHECK(result.rate_window.second == 100);
  REQUIRE(result.envelope.has_value());
  CHECK(result.envelope->checked > 0);

  const auto table = parse_trace_csv_file((out.path / "quad.csv").string());
  CHECK(table.rows() == 10);
  CHECK(table.replications == 2);
  CHECK(table.k.front() == 10);
  CHECK(table.k.back() == 100);

  const std::string report_json = read_file(out.path / "report.json");
  CHECK(report_json.find("\"library_version\": \"1.0.0\"") !=
        std::string::npos);
  CHECK(report_json.find("\"name\": \"quad\"") != std::string::npos);
  CHECK(report_json.find("\"status\": \"ok\"") != std::string::npos);
  CHECK(report_to_json(report).find("\"combinations\"") != std::string::npos);
}

TEST_CASE("identical specs reproduce byte-identical CSV artifacts") {
  DirGuard out1{temp_dir("det1")};
  DirGuard out2{temp_dir("det2")};
  const std::string section = quad_section("quad", "7002");
  run_experiment(parse("output_dir = " + out1.path.string() + "\n" + section));
  run_experiment(parse("output_dir = " + out2.path.string() + "\n" + section));
  CHECK(read_file(out1.path / "quad.csv") == read_file(out2.path / "quad.csv"));
}

TEST_CASE("a diverging combination is isolated, not fatal") {
  DirGuard out{temp_dir("diverge")};
  // The curved-valley problem publishes no curvature constants, so an
  // oversized fixed step passes feasibility with warnings and then blows up.
  const auto spec = parse(
      "output_dir = " + out.path.string() + "\n" + quad_section("ok", "11") +
      "\n"
      "[explodes]\n"
      "problem = rosenbrock\n"
      "dimension = 2\n"
      "optimizer = sgfd\n"
      "schedule = fixed\n"
      "alpha = 0.9\n"
      "x1 = 3, 3\n"
      "iterations = 50\n"
      "replications = 1\n"
      "seed = 12\n");
  validate_experiment(spec);
  const auto report = run_experiment(spec);

  REQUIRE(report.results.size() == 2);
  const auto& stable = report.results[0];
  const auto& exploded = report.results[1];
  CHECK_FALSE(stable.diverged);
  CHECK(std::filesystem::exists(out.path / "ok.csv"));

  CHECK(exploded.diverged);
  CHECK(exploded.divergence_iteration >= 1);
  CHECK(exploded.csv_name.empty());
  CHECK_FALSE(std::filesystem::exists(out.path / "explodes.csv"));

  const std::string report_json = read_file(out.path / "report.json");
  CHECK(report_json.find("\"status\": \"diverged\"") != std::string::npos);
}

TEST_CASE("problem construction is deterministic in the seed") {
  const auto spec =
      parse("output_dir = out\n" + quad_section("q", "31415"));
  const auto p1 = build_problem(spec.combinations[0]);
  const auto p2 = build_problem(spec.combinations[0]);
  REQUIRE(p1.constants.minimizer.has_value());
  CHECK(*p1.constants.minimizer == *p2.constants.minimizer);

  auto other = spec.combinations[0];
  other.seed = 27182;
  const auto p3 = build_problem(other);
  CHECK(*p1.constants.minimizer != *p3.constants.minimizer);
}

TEST_CASE("worker count comes from the environment, clamped") {
  ::unsetenv("SGFD_WORKERS");
  CHECK(worker_count() == 1);
  ::setenv("SGFD_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  ::setenv("SGFD_WORKERS", "0", 1);
  CHECK(worker_count() == 1);
  ::setenv("SGFD_WORKERS", "100000", 1);
  CHECK(worker_count() == 256);
  ::setenv("SGFD_WORKERS", "abc", 1);
  CHECK(worker_count() == 1);
  ::unsetenv("SGFD_WORKERS");
}

TEST_CASE("an empty combination list still yields a report") {
  DirGuard out{temp_dir("empty")};
  const auto spec = parse("output_dir = " + out.path.string() + "\n");
  CHECK_NOTHROW(validate_experiment(spec));
  const auto report = run_experiment(spec);
  CHECK(report.results.empty());
  CHECK(std::filesystem::exists(out.path / "report.json"));
}
