#include "rna/experiment.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "rna/error.hpp"

namespace rna {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  s = trim(s);
  if (s.empty()) return parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::InvalidConfig,
              "invalid value '" + std::string(value) + "' for '" + std::string(key) + "'");
}

template <typename Int>
Int parse_integer(std::string_view key, std::string_view text) {
  text = trim(text);
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) bad_value(key, text);
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  bad_value(key, text);
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += format_exact(values[i]);
  }
  return out;
}

std::string_view problem_name(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Quadratic: return "quadratic";
    case ProblemKind::Logistic: return "logistic";
    case ProblemKind::Mlp: return "mlp";
  }
  return "quadratic";
}

}  // namespace

std::string format_exact(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorKind::InvalidConfig, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> values;
  for (auto part : split(text, ',')) values.push_back(parse_double(part));
  return values;
}

void apply_setting(ExperimentSpec& spec, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  auto number = [&] {
    try {
      return parse_double(value);
    } catch (const Error&) {
      bad_value(key, value);
    }
  };

  if (key == "problem") {
    if (value == "quadratic") spec.problem.kind = ProblemKind::Quadratic;
    else if (value == "logistic") spec.problem.kind = ProblemKind::Logistic;
    else if (value == "mlp") spec.problem.kind = ProblemKind::Mlp;
    else bad_value(key, value);
  } else if (key == "dim") {
    spec.problem.dim = parse_integer<Index>(key, value);
  } else if (key == "condition") {
    spec.problem.condition = number();
  } else if (key == "samples") {
    spec.problem.samples = parse_integer<Index>(key, value);
  } else if (key == "l2") {
    spec.problem.l2 = number();
  } else if (key == "hidden") {
    spec.problem.hidden = parse_integer<Index>(key, value);
  } else if (key == "seed") {
    spec.seed = parse_integer<std::uint64_t>(key, value);
  } else if (key == "init_scale") {
    spec.init_scale = number();
  } else if (key == "epochs") {
    spec.epochs = parse_integer<std::int64_t>(key, value);
  } else if (key == "eta") {
    if (value == "auto") {
      spec.auto_eta = true;
    } else {
      spec.auto_eta = false;
      spec.optimizer.eta = number();
    }
  } else if (key == "momentum") {
    spec.optimizer.momentum = number();
  } else if (key == "weight_decay") {
    spec.optimizer.weight_decay = number();
  } else if (key == "schedule") {
    spec.optimizer.schedule.clear();
    for (auto item : split(value, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) bad_value(key, value);
      ScheduleDrop drop;
      drop.epoch = parse_integer<std::int64_t>(key, item.substr(0, colon));
      try {
        drop.multiplier = parse_double(item.substr(colon + 1));
      } catch (const Error&) {
        bad_value(key, value);
      }
      spec.optimizer.schedule.push_back(drop);
    }
  } else if (key == "batch_size") {
    if (value == "full" || value.empty()) spec.optimizer.batch_size.reset();
    else spec.optimizer.batch_size = parse_integer<Index>(key, value);
  } else if (key == "k") {
    spec.rna.window = parse_integer<Index>(key, value);
  } else if (key == "lambda") {
    spec.rna.lambda = number();
  } else if (key == "lambda_grid") {
    RnaConfig probe;
    try {
      probe.lambda_grid = parse_double_list(value);
      probe.validate();
    } catch (const Error&) {
      bad_value(key, value);
    }
    spec.rna.lambda_grid = std::move(probe.lambda_grid);
  } else if (key == "weight_target") {
    if (value == "latest") spec.rna.weight_target = WeightTarget::LatestK;
    else if (value == "oldest") spec.rna.weight_target = WeightTarget::OldestK;
    else bad_value(key, value);
  } else if (key == "flush_on_drop") {
    spec.flush_on_drop = parse_bool(key, value);
  } else if (key == "metrics_out") {
    spec.metrics_out = std::string(value);
  } else if (key == "checkpoint_out") {
    spec.checkpoint_out = std::string(value);
  } else if (key == "iterates_out") {
    spec.iterates_out = std::string(value);
  } else {
    throw Error(ErrorKind::InvalidConfig, "unknown configuration key '" + std::string(key) + "'");
  }
}

ExperimentSpec parse_config(std::string_view text, ExperimentSpec base) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

ExperimentSpec load_config(const std::filesystem::path& path, ExperimentSpec base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), std::move(base));
}

std::string to_config_text(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "problem = " << problem_name(spec.problem.kind) << '\n'
      << "dim = " << spec.problem.dim << '\n'
      << "condition = " << format_exact(spec.problem.condition) << '\n'
      << "samples = " << spec.problem.samples << '\n'
      << "l2 = " << format_exact(spec.problem.l2) << '\n'
      << "hidden = " << spec.problem.hidden << '\n'
      << "seed = " << spec.seed << '\n'
      << "init_scale = " << format_exact(spec.init_scale) << '\n'
      << "epochs = " << spec.epochs << '\n'
      << "eta = " << (spec.auto_eta ? std::string("auto") : format_exact(spec.optimizer.eta)) << '\n'
      << "momentum = " << format_exact(spec.optimizer.momentum) << '\n'
      << "weight_decay = " << format_exact(spec.optimizer.weight_decay) << '\n';
  out << "schedule = ";
  for (std::size_t i = 0; i < spec.optimizer.schedule.size(); ++i) {
    if (i > 0) out << ',';
    out << spec.optimizer.schedule[i].epoch << ':' << format_exact(spec.optimizer.schedule[i].multiplier);
  }
  out << '\n'
      << "batch_size = "
      << (spec.optimizer.batch_size ? std::to_string(*spec.optimizer.batch_size) : std::string("full")) << '\n'
      << "k = " << spec.rna.window << '\n'
      << "lambda = " << format_exact(spec.rna.lambda) << '\n'
      << "lambda_grid = " << join(spec.rna.lambda_grid) << '\n'
      << "weight_target = " << (spec.rna.weight_target == WeightTarget::LatestK ? "latest" : "oldest") << '\n'
      << "flush_on_drop = " << (spec.flush_on_drop ? "true" : "false") << '\n'
      << "metrics_out = " << spec.metrics_out.string() << '\n'
      << "checkpoint_out = " << spec.checkpoint_out.string() << '\n'
      << "iterates_out = " << spec.iterates_out.string() << '\n';
  return out.str();
}

std::unique_ptr<Problem> make_problem(const ExperimentSpec& spec) {
  const ProblemSpec& p = spec.problem;
  switch (p.kind) {
    case ProblemKind::Quadratic:
      return std::make_unique<QuadraticProblem>(make_quadratic(p.dim, p.condition, spec.seed));
    case ProblemKind::Logistic:
      return std::make_unique<LogisticProblem>(make_logistic(p.samples, p.dim, p.l2, spec.seed));
    case ProblemKind::Mlp:
      return std::make_unique<MlpProblem>(make_mlp(p.dim, p.hidden, p.samples, spec.seed));
  }
  throw Error(ErrorKind::InvalidConfig, "unknown problem kind");
}

VectorXd initial_point(const ExperimentSpec& spec, Index dim) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32), 0x1u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  VectorXd theta(dim);
  for (Index i = 0; i < dim; ++i) theta(i) = spec.init_scale * normal(rng);
  return theta;
}

OptimizerConfig resolved_optimizer(const ExperimentSpec& spec, const Problem& problem) {
  OptimizerConfig cfg = spec.optimizer;
  cfg.seed = spec.seed;
  if (spec.auto_eta) cfg.eta = problem.smoothness() ? 1.0 / *problem.smoothness() : 0.1;
  return cfg;
}

}  // namespace rna
