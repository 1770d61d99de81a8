#include "sgfd/experiment.hpp"

#include <atomic>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sgfd/rng.hpp"
#include "sgfd/trace_io.hpp"

namespace sgfd {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void spec_error(const std::string& origin, long line,
                             const std::string& what) {
  std::ostringstream msg;
  msg << origin << ":" << line << ": " << what;
  throw std::invalid_argument(msg.str());
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

struct KeyValue {
  std::string value;
  long line = 0;
  bool consumed = false;
};

struct Section {
  std::string name;
  long line = 0;
  std::map<std::string, KeyValue> keys;
};

// Reads a key, marking it consumed so leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(Section& section, const std::string& origin)
      : section_(section), origin_(origin) {}

  std::optional<std::string> raw(const std::string& key) {
    auto it = section_.keys.find(key);
    if (it == section_.keys.end()) return std::nullopt;
    it->second.consumed = true;
    last_line_ = it->second.line;
    return it->second.value;
  }

  std::string require(const std::string& key) {
    auto v = raw(key);
    if (!v)
      spec_error(origin_, section_.line,
                 "section [" + section_.name + "] is missing required key '" +
                     key + "'");
    return *v;
  }

  double number(const std::string& key, double fallback) {
    auto v = raw(key);
    return v ? parse_double(key, *v) : fallback;
  }

  std::optional<double> number_opt(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    return parse_double(key, *v);
  }

  double require_number(const std::string& key) {
    return parse_double(key, require(key));
  }

  long integer(const std::string& key, long fallback) {
    auto v = raw(key);
    return v ? parse_long(key, *v) : fallback;
  }

  long require_integer(const std::string& key) {
    return parse_long(key, require(key));
  }

  std::uint64_t require_uint64(const std::string& key) {
    const std::string s = require(key);
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE ||
        s.front() == '-')
      fail_value(key, s, "an unsigned integer");
    return static_cast<std::uint64_t>(v);
  }

  bool boolean(const std::string& key, bool fallback) {
    auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true") return true;
    if (*v == "false") return false;
    fail_value(key, *v, "'true' or 'false'");
  }

  void finish() const {
    for (const auto& [key, kv] : section_.keys)
      if (!kv.consumed)
        spec_error(origin_, kv.line,
                   "section [" + section_.name + "]: unknown key '" + key +
                       "' (see docs/config.md)");
  }

  [[noreturn]] void fail_value(const std::string& key, const std::string& got,
                               const std::string& want) const {
    spec_error(origin_, last_line_ ? last_line_ : section_.line,
               "section [" + section_.name + "], key '" + key + "': '" + got +
                   "' is not " + want);
  }

 private:
  double parse_double(const std::string& key, const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
      fail_value(key, s, "a number");
    return v;
  }

  long parse_long(const std::string& key, const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
      fail_value(key, s, "an integer");
    return v;
  }

  Section& section_;
  const std::string& origin_;
  long last_line_ = 0;
};

StepKind parse_step_kind(SectionReader& reader, const std::string& value) {
  for (const StepKind kind :
       {StepKind::kSingleSample, StepKind::kMinibatchSharedDirection,
        StepKind::kNestedBatch, StepKind::kPairedSampleDirection,
        StepKind::kFullObjectiveSingle, StepKind::kFullObjectiveBatch})
    if (value == step_kind_name(kind)) return kind;
  reader.fail_value("variant", value, "a known step variant name");
}

Vec parse_vector(SectionReader& reader, const std::string& key,
                 const std::string& value) {
  Vec out;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    const std::string field = trim(value.substr(start, comma - start));
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size() ||
        errno == ERANGE)
      reader.fail_value(key, field, "a number in a comma-separated list");
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

CombinationSpec combination_from_section(Section& section,
                                         const std::string& origin) {
  SectionReader reader(section, origin);
  CombinationSpec combo;
  combo.name = section.name;

  combo.problem_kind = reader.require("problem");
  if (combo.problem_kind == "quadratic") {
    combo.dimension = static_cast<int>(reader.require_integer("dimension"));
    combo.condition = reader.number("condition", 10.0);
    combo.noise_sd = reader.number("noise_sd", 1.0);
  } else if (combo.problem_kind == "logistic") {
    if (auto path = reader.raw("dataset")) {
      combo.dataset_path = *path;
    } else {
      combo.synthetic_samples = reader.require_integer("samples");
      combo.dimension = static_cast<int>(reader.require_integer("dimension"));
    }
    combo.l2 = reader.number("l2", 0.01);
  } else if (combo.problem_kind == "rosenbrock") {
    combo.dimension = static_cast<int>(reader.require_integer("dimension"));
  } else {
    reader.fail_value("problem", combo.problem_kind,
                      "'quadratic', 'logistic', or 'rosenbrock'");
  }

  combo.optimizer = reader.require("optimizer");
  if (combo.optimizer != "sgfd" && combo.optimizer != "momentum" &&
      combo.optimizer != "reference-sgd")
    reader.fail_value("optimizer", combo.optimizer,
                      "'sgfd', 'momentum', or 'reference-sgd'");

  if (auto v = reader.raw("variant"))
    combo.variant.kind = parse_step_kind(reader, *v);
  combo.variant.batch_size = reader.integer("batch", 1);
  combo.variant.inner_batch = reader.integer("inner_batch", 1);

  if (auto v = reader.raw("directions")) {
    if (*v == "uniform")
      combo.law = DirectionLaw::kUniformSymmetric;
    else if (*v == "normal")
      combo.law = DirectionLaw::kStandardNormal;
    else
      reader.fail_value("directions", *v, "'uniform' or 'normal'");
  }

  const std::string schedule = reader.raw("schedule").value_or("robbins-monro");
  try {
    if (schedule == "robbins-monro") {
      combo.schedule = StepsizeSchedule::robbins_monro(
          reader.require_number("beta"), reader.require_number("sigma"));
    } else if (schedule == "fixed") {
      combo.schedule = StepsizeSchedule::fixed(reader.require_number("alpha"));
    } else if (schedule == "inverse-square") {
      combo.schedule =
          StepsizeSchedule::inverse_square(reader.require_number("beta"));
    } else {
      reader.fail_value("schedule", schedule,
                        "'robbins-monro', 'fixed', or 'inverse-square'");
    }
  } catch (const std::invalid_argument& e) {
    spec_error(origin, section.line,
               "section [" + section.name + "]: " + e.what());
  }

  combo.iterations = reader.require_integer("iterations");
  combo.replications = reader.require_integer("replications");
  combo.seed = reader.require_uint64("seed");
  combo.stride = reader.integer("stride", 1);
  if (auto v = reader.raw("x1")) combo.x1 = parse_vector(reader, "x1", *v);

  const std::string decay = reader.raw("decay").value_or("changing");
  try {
    if (decay == "changing")
      combo.momentum.decay = DecaySchedule::changing(reader.number("p", 2.0));
    else if (decay == "fixed")
      combo.momentum.decay =
          DecaySchedule::fixed(reader.number("gamma", 0.9));
    else
      reader.fail_value("decay", decay, "'changing' or 'fixed'");
  } catch (const std::invalid_argument& e) {
    spec_error(origin, section.line,
               "section [" + section.name + "]: " + e.what());
  }
  combo.momentum.frozen_trajectory = reader.boolean("frozen", false);
  if (auto v = reader.number_opt("clip_radius")) combo.momentum.clip_radius = v;

  reader.finish();
  return combo;
}

// ----------------------------------------------------------- running one

RunConfig make_run_config(const CombinationSpec& combo,
                          const StochasticProblem& problem) {
  RunConfig config;
  config.variant = combo.variant;
  config.schedule = combo.schedule;
  config.directions = DirectionDistribution{combo.law, problem.dimension};
  config.iterations = combo.iterations;
  config.replications = static_cast<int>(combo.replications);
  config.seed = combo.seed;
  config.record_stride = combo.stride;
  config.x1 = combo.x1;
  return config;
}

// Envelope bookkeeping for plain Robbins-Monro runs on problems with known
// constants: fit the variance model on a small probe grid, derive M_d, and
// check the decay envelope over the recorded rows.
void attach_envelope(const CombinationSpec& combo,
                     const StochasticProblem& problem, const Trace& trace,
                     CombinationResult& result) {
  if (combo.optimizer != "sgfd") return;
  if (combo.schedule.kind != ScheduleKind::kRobbinsMonro) return;
  const auto& c = problem.constants;
  if (!c.strong_convexity || !c.smoothness || !c.optimal_value || !c.minimizer)
    return;
  if (trace.rows.empty() || !trace.rows.front().mean_gap) return;

  const DirectionDistribution dist{combo.law, problem.dimension};
  const Vec& x1 = trace.x1;
  Vec mid(x1.size());
  add_scaled(x1, 1.0, *c.minimizer, mid);
  for (auto& v : mid) v *= 0.5;
  const std::vector<const Vec*> probes = {&x1, &mid, &*c.minimizer};
  const double a1 = combo.schedule.stepsize(1);
  const std::vector<double> alphas = {a1, 0.5 * a1, 0.25 * a1};

  StreamSeeder seeder(combo.seed);
  std::vector<double> grid_alpha, grid_grad_sq, grid_var;
  long stream = 0;
  for (const Vec* probe : probes) {
    const double g_sq = norm_sq(problem.reference_gradient(*probe));
    for (double alpha : alphas) {
      auto rng = seeder.stream(StreamSeeder::kProbeReplication, stream++);
      const auto moments = estimate_step_moments(problem, combo.variant, dist,
                                                 *probe, alpha, 2000, rng);
      grid_alpha.push_back(alpha);
      grid_grad_sq.push_back(g_sq);
      grid_var.push_back(moments.variance);
    }
  }
  try {
    const auto fit = fit_variance_model(grid_alpha, grid_grad_sq, grid_var);
    const auto dm = moment_constants(dist);
    const double m_d =
        step_noise_constant(fit.m_hat, problem.dimension, dm.d_zeta);
    BoundParams params{combo.schedule.beta, combo.schedule.sigma,
                       *c.strong_convexity, 1};
    const double gap1 = trace.initial_objective - *c.optimal_value;
    result.envelope =
        envelope_pass_fraction(trace, params, *c.smoothness, m_d, gap1);
    result.m_hat = fit.m_hat;
    result.m_v_hat = fit.m_v_hat;
  } catch (const std::invalid_argument& e) {
    result.warnings.emplace_back(std::string("envelope skipped: ") + e.what());
  }
}

CombinationResult run_one(const CombinationSpec& combo,
                          const StochasticProblem& problem) {
  CombinationResult result;
  result.name = combo.name;
  result.problem_kind = combo.problem_kind;
  result.optimizer = combo.optimizer;
  result.variant_name = step_kind_name(combo.variant.kind);
  result.iterations = combo.iterations;
  result.replications = combo.replications;
  result.stride = combo.stride;
  result.seed = combo.seed;
  result.constants = problem.constants;
  result.moments =
      moment_constants(DirectionDistribution{combo.law, problem.dimension});
  const RunConfig config = make_run_config(combo, problem);
  const auto started = std::chrono::steady_clock::now();
  try {
    if (combo.optimizer == "sgfd")
      result.trace = run_sgfd(problem, config);
    else if (combo.optimizer == "momentum")
      result.trace = run_accelerated(problem, config, combo.momentum);
    else
      result.trace = run_reference_sgd(problem, config);
  } catch (const DivergenceError& e) {
    result.diverged = true;
    result.divergence_iteration = e.iteration;
    result.divergence_replication = e.replication;
    result.divergence_detail = e.what();
    result.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    return result;
  }
  result.wall_clock_sec = result.trace.wall_clock_sec;
  result.warnings = result.trace.warnings;
  result.csv_name = combo.name + ".csv";
  result.initial_objective = result.trace.initial_objective;
  result.final_objective = problem.full_objective
                               ? problem.full_objective(result.trace.final_x)
                               : std::numeric_limits<double>::quiet_NaN();
  if (!result.trace.rows.empty() && result.trace.rows.front().mean_gap) {
    result.rate_window = {std::max<long>(1, combo.iterations / 10),
                          combo.iterations};
    try {
      result.rate = fit_trace_gap_rate(result.trace, result.rate_window.first,
                                       result.rate_window.second);
    } catch (const std::invalid_argument& e) {
      result.warnings.emplace_back(std::string("rate fit skipped: ") +
                                   e.what());
    }
  }
  attach_envelope(combo, problem, result.trace, result);
  return result;
}

json json_or_null(std::optional<double> v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

json result_to_json(const CombinationResult& r) {
  json j;
  j["name"] = r.name;
  j["problem"] = r.problem_kind;
  j["optimizer"] = r.optimizer;
  j["variant"] = r.variant_name;
  j["iterations"] = r.iterations;
  j["replications"] = r.replications;
  j["stride"] = r.stride;
  j["seed"] = r.seed;
  j["status"] = r.diverged ? "diverged" : "ok";
  if (r.diverged) {
    j["divergence"] = {{"iteration", r.divergence_iteration},
                       {"replication", r.divergence_replication},
                       {"detail", r.divergence_detail}};
  } else {
    j["csv"] = r.csv_name;
    j["initial_objective"] = json_or_null(r.initial_objective);
    j["final_objective"] = json_or_null(r.final_objective);
  }
  j["constants"] = {
      {"strong_convexity", json_or_null(r.constants.strong_convexity)},
      {"smoothness", json_or_null(r.constants.smoothness)},
      {"optimal_value", json_or_null(r.constants.optimal_value)},
      {"direction_fourth_moment", r.moments.fourth_moment},
      {"direction_scale_bound", r.moments.d_zeta},
  };
  if (r.rate) {
    j["rate_fit"] = {{"slope", r.rate->slope},
                     {"intercept", r.rate->intercept},
                     {"residual_rms", r.rate->residual_rms},
                     {"points_used", r.rate->points_used},
                     {"points_dropped", r.rate->points_dropped},
                     {"window", {r.rate_window.first, r.rate_window.second}}};
  } else {
    j["rate_fit"] = nullptr;
  }
  if (r.envelope) {
    j["envelope"] = {{"pass_fraction", r.envelope->pass_fraction},
                     {"checked", r.envelope->checked},
                     {"m_d", r.envelope->m_d},
                     {"m_hat", r.m_hat},
                     {"m_v_hat", r.m_v_hat}};
  } else {
    j["envelope"] = nullptr;
  }
  j["feasibility_warnings"] = r.warnings;
  j["wall_clock_sec"] = r.wall_clock_sec;
  return j;
}

}  // namespace

ExperimentSpec parse_experiment_text(const std::string& text,
                                     const std::string& origin) {
  ExperimentSpec spec;
  std::vector<Section> sections;
  Section prelude;
  prelude.name = "";
  Section* current = &prelude;

  std::istringstream in(text);
  std::string raw_line;
  long line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string line = raw_line;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        spec_error(origin, line_no, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) spec_error(origin, line_no, "empty section name");
      for (char ch : name)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' &&
            ch != '_')
          spec_error(origin, line_no,
                     "section name '" + name +
                         "' may only use letters, digits, '-', '_'");
      for (const auto& s : sections)
        if (s.name == name)
          spec_error(origin, line_no, "duplicate section [" + name + "]");
      sections.push_back(Section{name, line_no, {}});
      current = &sections.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      spec_error(origin, line_no, "expected 'key = value' or '[section]'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) spec_error(origin, line_no, "empty key");
    if (current->keys.count(key))
      spec_error(origin, line_no,
                 current->name.empty()
                     ? "duplicate prelude key '" + key + "'"
                     : "duplicate key '" + key + "' in section [" +
                           current->name + "]");
    current->keys[key] = KeyValue{value, line_no, false};
  }

  for (auto& [key, kv] : prelude.keys) {
    if (key == "output_dir") {
      spec.output_dir = kv.value;
      kv.consumed = true;
    } else {
      spec_error(origin, kv.line,
                 "unknown prelude key '" + key + "' (see docs/config.md)");
    }
  }
  if (spec.output_dir.empty())
    spec_error(origin, 1, "output_dir must not be empty");

  for (auto& section : sections)
    spec.combinations.push_back(combination_from_section(section, origin));
  return spec;
}

ExperimentSpec parse_experiment_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::invalid_argument("cannot open experiment spec: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_text(buffer.str(), path);
}

StochasticProblem build_problem(const CombinationSpec& combo) {
  StreamSeeder seeder(combo.seed);
  auto rng = seeder.stream(StreamSeeder::kConstructionReplication, 0);
  if (combo.problem_kind == "quadratic")
    return make_quadratic(spaced_eigenvalues(combo.dimension, combo.condition),
                          combo.noise_sd, rng);
  if (combo.problem_kind == "logistic") {
    const Dataset data =
        combo.dataset_path.empty()
            ? make_synthetic_logistic_dataset(combo.synthetic_samples,
                                              combo.dimension, rng)
            : load_dataset(combo.dataset_path);
    return make_logistic(data, combo.l2);
  }
  if (combo.problem_kind == "rosenbrock")
    return make_rosenbrock_like(combo.dimension);
  throw std::invalid_argument("unknown problem kind: " + combo.problem_kind);
}

namespace {

std::vector<StochasticProblem> validate_and_build(const ExperimentSpec& spec) {
  std::vector<StochasticProblem> problems;
  problems.reserve(spec.combinations.size());
  for (std::size_t i = 0; i < spec.combinations.size(); ++i) {
    const auto& combo = spec.combinations[i];
    for (std::size_t j = 0; j < i; ++j)
      if (spec.combinations[j].seed == combo.seed)
        throw std::invalid_argument(
            "sections [" + spec.combinations[j].name + "] and [" + combo.name +
            "] share seed " + std::to_string(combo.seed) +
            "; seeds must be distinct per combination");
    try {
      StochasticProblem problem = build_problem(combo);
      const RunConfig config = make_run_config(combo, problem);
      validate_run_config(problem, config);
      FeasibilityContext ctx;
      ctx.strong_convexity = problem.constants.strong_convexity;
      ctx.smoothness = problem.constants.smoothness;
      check_feasibility(config.schedule, ctx,
                        combo.optimizer == "momentum"
                            ? OptimizerKind::kMomentum
                            : OptimizerKind::kPlain);
      if (combo.optimizer == "reference-sgd" && !problem.sample_gradient)
        throw std::invalid_argument(
            "reference-sgd needs per-sample gradients, which problem '" +
            combo.problem_kind + "' does not provide");
      problems.push_back(std::move(problem));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("section [" + combo.name + "]: " + e.what());
    }
  }
  return problems;
}

}  // namespace

void validate_experiment(const ExperimentSpec& spec) {
  (void)validate_and_build(spec);
}

int worker_count() {
  const char* env = std::getenv("SGFD_WORKERS");
  if (!env) return 1;
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || errno == ERANGE || v < 1) return 1;
  return static_cast<int>(std::min<long>(v, 256));
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  const auto started = std::chrono::steady_clock::now();
  const std::vector<StochasticProblem> problems = validate_and_build(spec);

  ExperimentReport report;
  report.output_dir = spec.output_dir;
  report.results.resize(spec.combinations.size());

  const std::size_t n = spec.combinations.size();
  const int workers =
      static_cast<int>(std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        report.results[i] = run_one(spec.combinations[i], problems[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Single writer: all artifacts are emitted here, after every combination
  // has finished, in section order.
  std::filesystem::create_directories(spec.output_dir);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& result = report.results[i];
    if (result.diverged) continue;
    const auto path =
        std::filesystem::path(spec.output_dir) / result.csv_name;
    write_trace_csv(result.trace, path.string());
    const TraceTable parsed = parse_trace_csv_file(path.string());
    if (parsed.rows() != result.trace.rows.size())
      throw std::runtime_error("emitted CSV failed its parse-back check: " +
                               path.string());
  }

  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();

  const auto report_path =
      std::filesystem::path(spec.output_dir) / "report.json";
  std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open for writing: " +
                             report_path.string());
  out << report_to_json(report);
  return report;
}

std::string report_to_json(const ExperimentReport& report) {
  json j;
  j["library_version"] = kLibraryVersion;
  j["output_dir"] = report.output_dir;
  j["wall_clock_sec"] = report.wall_clock_sec;
  j["combinations"] = json::array();
  for (const auto& r : report.results) j["combinations"].push_back(result_to_json(r));
  return j.dump(2) + "\n";
}

}  // namespace sgfd
