#pragma once

// Experiment configuration: a flat key/value text format with optional
// [section] headers. Grammar, one item per line:
//
//   # comment
//   [section]                  prefixes following keys with "section."
//   key.path = value
//
// where value is a decimal number, true/false, a bare word, a "string", or a
// bracketed array of values (arrays may nest, e.g. [[1, 0], [0, 1]]).
// Parsing collects every problem before failing; each message names the line
// or the key path it concerns.

#include <Eigen/Dense>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "steinflow/continuum.hpp"
#include "steinflow/ensemble.hpp"
#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/random.hpp"
#include "steinflow/svgd.hpp"
#include "steinflow/targets.hpp"
#include "steinflow/verify.hpp"

namespace steinflow {

/// All problems found in a configuration, in the order they were found.
class ConfigErrors : public ConfigError {
 public:
  explicit ConfigErrors(std::vector<std::string> errors)
      : ConfigError(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out = "invalid configuration:";
    for (const auto& e : errors) out += "\n  " + e;
    return out;
  }
  std::vector<std::string> errors_;
};

namespace config {

struct Value {
  enum class Kind { Number, Bool, Word, String, Array };
  Kind kind = Kind::Number;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<Value> items;
};

struct Entry {
  Value value;
  int line = 0;
};

using Table = std::map<std::string, Entry>;

namespace detail {

class LineParser {
 public:
  LineParser(std::string_view s, int line, std::vector<std::string>& errors) : s_(s), line_(line), errors_(errors) {}

  std::optional<Value> value() {
    skip_space();
    if (pos_ >= s_.size()) return fail("missing value");
    const char c = s_[pos_];
    if (c == '[') return array();
    if (c == '"') return string();
    if (c == '-' || c == '+' || c == '.' || (c >= '0' && c <= '9')) return number();
    return word();
  }

  bool at_end() {
    skip_space();
    return pos_ >= s_.size();
  }

  std::optional<Value> fail(const std::string& msg) {
    errors_.push_back("line " + std::to_string(line_) + ": " + msg);
    return std::nullopt;
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  std::optional<Value> array() {
    ++pos_;
    Value v;
    v.kind = Value::Kind::Array;
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return v;
    }
    while (true) {
      auto item = value();
      if (!item) return std::nullopt;
      v.items.push_back(std::move(*item));
      skip_space();
      if (pos_ >= s_.size()) return fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return v;
      }
      return fail(std::string("unexpected '") + s_[pos_] + "' in array");
    }
  }

  std::optional<Value> string() {
    const auto close = s_.find('"', pos_ + 1);
    if (close == std::string_view::npos) return fail("unterminated string");
    Value v;
    v.kind = Value::Kind::String;
    v.text = std::string(s_.substr(pos_ + 1, close - pos_ - 1));
    pos_ = close + 1;
    return v;
  }

  std::optional<Value> number() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) ||
                               std::string_view("+-._").find(s_[end]) != std::string_view::npos)) {
      ++end;
    }
    std::string_view token = s_.substr(pos_, end - pos_);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    Value v;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v.number);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      return fail("malformed number '" + std::string(s_.substr(pos_, end - pos_)) + "'");
    }
    pos_ = end;
    return v;
  }

  std::optional<Value> word() {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
    if (end == pos_) return fail(std::string("unexpected character '") + s_[pos_] + "'");
    Value v;
    const std::string w(s_.substr(pos_, end - pos_));
    if (w == "true" || w == "false") {
      v.kind = Value::Kind::Bool;
      v.boolean = w == "true";
    } else {
      v.kind = Value::Kind::Word;
      v.text = w;
    }
    pos_ = end;
    return v;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  int line_;
  std::vector<std::string>& errors_;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

inline bool valid_key(std::string_view key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  for (std::size_t i = 0; i < key.size(); ++i) {
    const char c = key[i];
    if (c == '.' && key[i - 1] == '.') return false;
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return true;
}

}  // namespace detail

/// Syntax pass: text to a table of dotted keys. Appends problems to `errors`.
inline Table parse_table(std::string_view text, std::vector<std::string>& errors) {
  Table table;
  std::string section;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const std::string_view raw = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    const std::string_view line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']' || !detail::valid_key(detail::trim(line.substr(1, line.size() - 2)))) {
        errors.push_back(where + "malformed section header");
        continue;
      }
      section = std::string(detail::trim(line.substr(1, line.size() - 2))) + ".";
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back(where + "expected 'key = value'");
      continue;
    }
    const std::string_view key = detail::trim(line.substr(0, eq));
    if (!detail::valid_key(key)) {
      errors.push_back(where + "invalid key '" + std::string(key) + "'");
      continue;
    }
    detail::LineParser parser(line.substr(eq + 1), line_no, errors);
    auto value = parser.value();
    if (!value) continue;
    if (!parser.at_end()) {
      parser.fail("trailing characters after value");
      continue;
    }
    const std::string full = section + std::string(key);
    if (table.count(full)) {
      errors.push_back(where + "duplicate key '" + full + "' (first set on line " +
                       std::to_string(table[full].line) + ")");
      continue;
    }
    table[full] = Entry{std::move(*value), line_no};
  }
  return table;
}

/// Typed, validating reads from a table. Every key read is marked as known;
/// whatever is left over is reported as unknown.
class Reader {
 public:
  Reader(const Table& table, std::vector<std::string>& errors) : table_(table), errors_(errors) {}

  std::size_t error_count() const { return errors_.size(); }

  bool has(const std::string& key) const { return table_.count(key) != 0; }

  void error(const std::string& key, const std::string& msg) {
    auto it = table_.find(key);
    const std::string where = it != table_.end() ? " (line " + std::to_string(it->second.line) + ")" : "";
    errors_.push_back(key + where + ": " + msg);
  }

  const Value* raw(const std::string& key) {
    known_.insert(key);
    auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second.value;
  }

  double number(const std::string& key, double fallback) {
    const Value* v = raw(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::Number) {
      error(key, "expected a number");
      return fallback;
    }
    return v->number;
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) error(key, "must be positive");
    return v;
  }

  long integer(const std::string& key, long fallback, long min_value) {
    const Value* v = raw(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::Number || v->number != std::floor(v->number) || std::abs(v->number) > 1e15) {
      error(key, "expected an integer");
      return fallback;
    }
    if (v->number < static_cast<double>(min_value)) {
      error(key, "must be >= " + std::to_string(min_value));
      return fallback;
    }
    return static_cast<long>(v->number);
  }

  bool boolean(const std::string& key, bool fallback) {
    const Value* v = raw(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::Bool) {
      error(key, "expected true or false");
      return fallback;
    }
    return v->boolean;
  }

  /// A bare word or string restricted to `choices`.
  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& choices) {
    const Value* v = raw(key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::Word && v->kind != Value::Kind::String) {
      error(key, "expected one of " + list(choices));
      return fallback;
    }
    for (const auto& c : choices) {
      if (v->text == c) return c;
    }
    error(key, "unknown value '" + v->text + "', expected one of " + list(choices));
    return fallback;
  }

  std::optional<Vector> vector(const std::string& key) {
    const Value* v = raw(key);
    if (!v) return std::nullopt;
    if (v->kind == Value::Kind::Number) return Vector::Constant(1, v->number);
    if (v->kind != Value::Kind::Array || v->items.empty()) {
      error(key, "expected a nonempty array of numbers");
      return std::nullopt;
    }
    Vector out(static_cast<Eigen::Index>(v->items.size()));
    for (std::size_t i = 0; i < v->items.size(); ++i) {
      if (v->items[i].kind != Value::Kind::Number) {
        error(key, "expected a nonempty array of numbers");
        return std::nullopt;
      }
      out[static_cast<Eigen::Index>(i)] = v->items[i].number;
    }
    return out;
  }

  /// A square matrix as nested rows; a bare number is a 1x1 matrix.
  std::optional<Matrix> matrix(const std::string& key) {
    const Value* v = raw(key);
    if (!v) return std::nullopt;
    if (v->kind == Value::Kind::Number) return Matrix::Constant(1, 1, v->number);
    if (v->kind != Value::Kind::Array || v->items.empty()) {
      error(key, "expected a square matrix given as an array of rows");
      return std::nullopt;
    }
    const auto n = static_cast<Eigen::Index>(v->items.size());
    Matrix out(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Value& row = v->items[static_cast<std::size_t>(r)];
      if (row.kind != Value::Kind::Array || static_cast<Eigen::Index>(row.items.size()) != n) {
        error(key, "expected a square matrix given as an array of rows");
        return std::nullopt;
      }
      for (Eigen::Index c = 0; c < n; ++c) {
        if (row.items[static_cast<std::size_t>(c)].kind != Value::Kind::Number) {
          error(key, "matrix entries must be numbers");
          return std::nullopt;
        }
        out(r, c) = row.items[static_cast<std::size_t>(c)].number;
      }
    }
    return out;
  }

  void mark(const std::string& key) { known_.insert(key); }

  std::vector<std::string> keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, e] : table_) {
      if (k.rfind(prefix, 0) == 0) out.push_back(k);
    }
    return out;
  }

  void report_unknown() {
    for (const auto& [k, e] : table_) {
      if (!known_.count(k)) errors_.push_back(k + " (line " + std::to_string(e.line) + "): unknown key");
    }
  }

 private:
  static std::string list(const std::vector<std::string>& choices) {
    std::string out;
    for (std::size_t i = 0; i < choices.size(); ++i) out += (i ? ", " : "") + choices[i];
    return out;
  }

  const Table& table_;
  std::vector<std::string>& errors_;
  std::set<std::string> known_;
};

}  // namespace config

struct InitSpec {
  enum class Family { Gaussian, Grid };
  Family family = Family::Gaussian;
  Vector mean;
  Matrix cov;
  double grid_lo = -3.0;
  double grid_hi = 3.0;
};

struct ExperimentConfig {
  std::string text;
  std::shared_ptr<const Target> target;
  KernelChoice kernel = KernelChoice::median_rule();
  InitSpec init;
  int n_particles = 100;
  StepSchedule schedule = StepSchedule::constant(0.05);
  RunOptions run;
  OdeConfig flow;
  int flow_record_every = 1;
  LangevinOptions langevin;
  std::uint64_t seed = 0;
  bool svg = false;
  verify::VerifyConfig verify;

  int dimension() const { return target->dimension(); }

  /// Initial particles; Gaussian draws use the ("init", 0) stream of `seed`.
  ParticleEnsemble initial_ensemble(std::uint64_t seed_value, bool track) const {
    if (init.family == InitSpec::Family::Grid) {
      if (track) throw TrackingDisabled("grid initialization has no density to track");
      return ParticleEnsemble::grid(n_particles, dimension(), init.grid_lo, init.grid_hi);
    }
    Rng rng = make_stream(seed_value, "init");
    return ParticleEnsemble::from_gaussian(GaussianTarget(init.mean, init.cov), n_particles, rng, track);
  }
};

namespace config::detail {

inline std::optional<GaussianTarget> gaussian(Reader& r, const std::string& prefix, std::optional<int> dim,
                                              bool mean_required) {
  const auto mean = r.vector(prefix + ".mean");
  const auto cov = r.matrix(prefix + ".cov");
  if (!mean && mean_required) {
    r.error(prefix + ".mean", "is required");
    return std::nullopt;
  }
  const int d = mean ? static_cast<int>(mean->size()) : (cov ? static_cast<int>(cov->rows()) : dim.value_or(1));
  if (dim && d != *dim) {
    r.error(prefix + ".mean", "dimension " + std::to_string(d) + " does not match " + std::to_string(*dim));
    return std::nullopt;
  }
  if (cov && cov->rows() != d) {
    r.error(prefix + ".cov", "must be " + std::to_string(d) + "x" + std::to_string(d));
    return std::nullopt;
  }
  try {
    return GaussianTarget(mean.value_or(Vector::Zero(d)), cov.value_or(Matrix::Identity(d, d)));
  } catch (const ConfigError& e) {
    r.error(prefix + ".cov", e.what());
    return std::nullopt;
  }
}

inline std::shared_ptr<const Target> target(Reader& r) {
  const std::string family = r.choice("target.family", "gaussian", {"gaussian", "mixture"});
  if (family == "gaussian") {
    auto g = gaussian(r, "target", std::nullopt, true);
    return g ? std::make_shared<GaussianTarget>(std::move(*g)) : nullptr;
  }
  const auto weights = r.vector("target.weights");
  if (!weights) {
    r.error("target.weights", "is required for a mixture");
    return nullptr;
  }
  std::vector<GaussianTarget> components;
  std::optional<int> dim;
  for (Eigen::Index k = 0; k < weights->size(); ++k) {
    auto g = gaussian(r, "target.components." + std::to_string(k), dim, true);
    if (!g) return nullptr;
    dim = g->dimension();
    components.push_back(std::move(*g));
  }
  for (const auto& key : r.keys_with_prefix("target.components.")) {
    const auto rest = key.substr(std::string("target.components.").size());
    const auto dot = rest.find('.');
    const std::string index = rest.substr(0, dot);
    if (index.find_first_not_of("0123456789") != std::string::npos || std::stol(index) >= weights->size()) {
      r.mark(key);
      r.error(key, "component index out of range for " + std::to_string(weights->size()) + " weights");
    }
  }
  try {
    return std::make_shared<MixtureTarget>(std::vector<double>(weights->begin(), weights->end()),
                                           std::move(components));
  } catch (const ConfigError& e) {
    r.error("target.weights", e.what());
    return nullptr;
  }
}

inline KernelChoice kernel(Reader& r) {
  const std::string family = r.choice("kernel.family", "rbf", {"rbf", "imq", "linear"});
  KernelSpec spec = family == "rbf" ? KernelSpec::rbf(1.0) : family == "imq" ? KernelSpec::imq(1.0) : KernelSpec::linear();
  const std::size_t errors_before = r.error_count();
  spec.imq_offset = r.number("kernel.imq_offset", spec.imq_offset);
  spec.imq_exponent = r.number("kernel.imq_exponent", spec.imq_exponent);
  bool median = family != "linear";
  if (const Value* v = r.raw("kernel.bandwidth")) {
    if ((v->kind == Value::Kind::Word || v->kind == Value::Kind::String) && v->text == "median") {
      median = true;
    } else if (v->kind == Value::Kind::Number) {
      median = false;
      spec.bandwidth = v->number;
      if (!(v->number > 0.0)) r.error("kernel.bandwidth", "must be positive or 'median'");
    } else {
      r.error("kernel.bandwidth", "must be a positive number or 'median'");
    }
  }
  if (median && family == "linear") {
    r.error("kernel.bandwidth", "the linear kernel has no bandwidth");
    median = false;
  }
  if (r.error_count() != errors_before) return KernelChoice{spec, median};
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    r.error(family == "imq" ? "kernel.imq_exponent" : "kernel.bandwidth", e.what());
  }
  return KernelChoice{spec, median};
}

inline void verify_section(Reader& r, verify::VerifyConfig& v) {
  const double init_mean = r.number("verify.init_mean", 2.0);
  const double bandwidth = r.positive("verify.bandwidth", 1.0);
  for (verify::GaussianSetup* s : {&v.descent.setup, &v.rate.setup}) {
    s->init_mean = Vector::Constant(1, init_mean);
    s->kernel = KernelSpec::rbf(bandwidth);
  }
  v.descent.setup.n = static_cast<int>(r.integer("verify.descent.n", v.descent.setup.n, 2));
  v.descent.steps = static_cast<int>(r.integer("verify.descent.steps", v.descent.steps, 0));
  v.descent.max_epsilon = r.number("verify.descent.max_epsilon", v.descent.max_epsilon);
  if (v.descent.max_epsilon < 0.0) r.error("verify.descent.max_epsilon", "must be >= 0");
  v.descent.safety = r.number("verify.descent.safety", v.descent.safety);
  if (!(v.descent.safety > 0.0 && v.descent.safety <= 1.0)) r.error("verify.descent.safety", "must lie in (0, 1]");
  if (r.has("verify.descent.step_scale")) v.descent.step_scale = r.positive("verify.descent.step_scale", 1.0);
  else r.mark("verify.descent.step_scale");
  v.rate.setup.n = static_cast<int>(r.integer("verify.rate.n", v.rate.setup.n, 2));
  v.rate.dt = r.positive("verify.rate.dt", v.rate.dt);
  if (auto times = r.vector("verify.rate.times")) v.rate.times.assign(times->begin(), times->end());
  v.rate.start_at_target = r.boolean("verify.rate.start_at_target", v.rate.start_at_target);
  v.logdet.trials = static_cast<int>(r.integer("verify.logdet.trials", v.logdet.trials, 1));
  v.logdet.max_dim = static_cast<int>(r.integer("verify.logdet.max_dim", v.logdet.max_dim, 1));
  v.bl.pairs = static_cast<int>(r.integer("verify.bl.pairs", v.bl.pairs, 0));
  v.bl.max_points = static_cast<int>(r.integer("verify.bl.max_points", v.bl.max_points, 1));
  if (v.bl.max_points > 32) r.error("verify.bl.max_points", "must be <= 32");
  v.bl.epsilon = r.number("verify.bl.epsilon", v.bl.epsilon);
  if (v.bl.epsilon < 0.0) r.error("verify.bl.epsilon", "must be >= 0");
  v.bl.grid_points = static_cast<int>(r.integer("verify.bl.grid_points", v.bl.grid_points, 2));
  v.bl.inflation = r.positive("verify.bl.inflation", v.bl.inflation);
  v.fixed_point.n = static_cast<int>(r.integer("verify.fixed_point.n", v.fixed_point.n, 1));
  v.fixed_point.shift = r.number("verify.fixed_point.shift", v.fixed_point.shift);
  v.norm_identity.ensembles = static_cast<int>(r.integer("verify.norm_identity.ensembles", v.norm_identity.ensembles, 0));
}

}  // namespace config::detail

/// Parse and validate a configuration. Throws ConfigErrors listing every problem.
inline ExperimentConfig parse_config(std::string_view text) {
  using config::Reader;
  using config::Table;
  using config::Value;
  namespace cd = config::detail;
  std::vector<std::string> errors;
  const Table table = config::parse_table(text, errors);
  Reader r(table, errors);
  ExperimentConfig cfg;
  cfg.text = std::string(text);

  const long seed = r.integer("seed", 0, 0);
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.svg = r.boolean("output.svg", false);
  cfg.target = cd::target(r);
  cfg.kernel = cd::kernel(r);
  cfg.n_particles = static_cast<int>(r.integer("particles.n", 100, 1));

  const int dim = cfg.target ? cfg.target->dimension() : 1;
  const std::string init_family = r.choice("init.family", "gaussian", {"gaussian", "grid"});
  if (init_family == "grid") {
    cfg.init.family = InitSpec::Family::Grid;
    cfg.init.grid_lo = r.number("init.grid_lo", cfg.init.grid_lo);
    cfg.init.grid_hi = r.number("init.grid_hi", cfg.init.grid_hi);
    if (!(cfg.init.grid_hi > cfg.init.grid_lo)) r.error("init.grid_hi", "must exceed init.grid_lo");
  } else if (auto g = cd::gaussian(r, "init", dim, false)) {
    cfg.init.mean = g->mean();
    cfg.init.cov = g->covariance();
  }

  if (cfg.init.family == InitSpec::Family::Grid && r.has("run.track_density")) {
    const Value* v = r.raw("run.track_density");
    if (v->kind == Value::Kind::Bool && v->boolean) r.error("run.track_density", "needs a gaussian init (grid has no density)");
  }

  const std::string mode = r.choice("schedule.mode", "constant", {"constant", "capped", "ksd_proportional"});
  cfg.schedule.mode = mode == "constant"  ? StepMode::Constant
                      : mode == "capped" ? StepMode::CappedBySpectral
                                         : StepMode::KsdProportional;
  cfg.schedule.base = r.positive("schedule.base", 0.05);
  cfg.schedule.beta = r.positive("schedule.beta", 1.0);
  cfg.schedule.safety = r.number("schedule.safety", 0.5);
  if (!(cfg.schedule.safety > 0.0 && cfg.schedule.safety <= 1.0)) r.error("schedule.safety", "must lie in (0, 1]");
  cfg.schedule.conservative = r.boolean("schedule.conservative", false);

  cfg.run.max_iter = static_cast<int>(r.integer("run.max_iter", 200, 1));
  cfg.run.record_every = static_cast<int>(r.integer("run.record_every", 1, 1));
  cfg.run.snapshot_every = static_cast<int>(r.integer("run.snapshot_every", 0, 0));
  cfg.run.track_density = r.boolean("run.track_density", false);

  cfg.flow.t_end = r.number("flow.t_end", 1.0);
  cfg.flow.dt = r.positive("flow.dt", 0.01);
  cfg.flow.integrator = r.choice("flow.integrator", "rk4", {"rk4", "euler"}) == "rk4" ? Integrator::RK4 : Integrator::Euler;
  cfg.flow_record_every = static_cast<int>(r.integer("flow.record_every", 1, 1));
  try {
    cfg.flow.validate();
  } catch (const ConfigError& e) {
    r.error("flow", e.what());
  }

  cfg.langevin.epsilon = r.positive("langevin.epsilon", 0.01);
  cfg.langevin.steps = r.integer("langevin.steps", 100, 0);
  cfg.langevin.record_every = static_cast<int>(r.integer("langevin.record_every", 1, 1));
  cfg.langevin.convention = r.choice("langevin.noise_convention", "sde", {"sde", "two_root_eps"}) == "sde"
                                ? NoiseConvention::Sde
                                : NoiseConvention::TwoRootEps;
  cfg.langevin.seed = cfg.seed;

  cfg.verify.seed = cfg.seed;
  cd::verify_section(r, cfg.verify);

  r.report_unknown();
  if (!errors.empty()) throw ConfigErrors(std::move(errors));
  return cfg;
}

}  // namespace steinflow
