#include "lom/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "lom/envs.hpp"
#include "lom/errors.hpp"

namespace lom::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError("config key '" + std::string(key) + "': invalid value '" + std::string(v) + "'");
  return out;
}

std::vector<std::string_view> split_commas(std::string_view v) {
  std::vector<std::string_view> parts;
  while (!v.empty()) {
    const auto pos = v.find(',');
    parts.push_back(trim(v.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    v.remove_prefix(pos + 1);
  }
  return parts;
}

std::string fmt_double(double v) {
  // shortest round-trip representation
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& learner_names() {
  static const std::vector<std::string> names{"lom", "bc", "mdn", "awac"};
  return names;
}

void RunConfig::validate() const {
  train.validate();
  (void)envs::Env::make(env);
  const auto& names = learner_names();
  if (std::find(names.begin(), names.end(), learner) == names.end())
    throw ConfigError("unknown learner '" + learner + "' (valid: lom, bc, mdn, awac)");
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be >= 1");
  if (dataset.empty() && dataset_episodes == 0) throw ConfigError("dataset_episodes must be >= 1");
  if (log_every == 0) throw ConfigError("log_every must be >= 1");
}

void apply(RunConfig& cfg, std::string_view key, std::string_view value) {
  auto& t = cfg.train;
  if (key == "env") cfg.env = value;
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "dataset_episodes") cfg.dataset_episodes = parse_number<std::size_t>(key, value);
  else if (key == "out") cfg.out = value;
  else if (key == "learner") cfg.learner = value;
  else if (key == "eval_episodes") cfg.eval_episodes = parse_number<std::size_t>(key, value);
  else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "seeds") {
    cfg.seeds.clear();
    for (auto p : split_commas(value)) cfg.seeds.push_back(parse_number<std::uint64_t>(key, p));
  } else if (key == "beta") t.beta = parse_number<double>(key, value);
  else if (key == "clip") t.clip = parse_number<double>(key, value);
  else if (key == "polyak") t.polyak = parse_number<double>(key, value);
  else if (key == "update_delay") t.update_delay = parse_number<std::size_t>(key, value);
  else if (key == "modes") t.num_modes = parse_number<std::size_t>(key, value);
  else if (key == "gamma") t.gamma = parse_number<double>(key, value);
  else if (key == "iters_mdn") t.iters_mdn = parse_number<std::size_t>(key, value);
  else if (key == "iters_main") t.iters_main = parse_number<std::size_t>(key, value);
  else if (key == "mc_samples") t.mc_samples = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") t.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "hidden") {
    t.hidden.clear();
    for (auto p : split_commas(value)) t.hidden.push_back(parse_number<std::size_t>(key, p));
  } else if (key == "lr") t.lr = parse_number<double>(key, value);
  else if (key == "log_every") cfg.log_every = parse_number<std::size_t>(key, value);
  else if (key == "eval_every") cfg.eval_every = parse_number<std::size_t>(key, value);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    apply(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string to_text(const RunConfig& cfg) {
  const auto& t = cfg.train;
  std::ostringstream os;
  os << "env = " << cfg.env << "\n"
     << "dataset = " << cfg.dataset << "\n"
     << "dataset_episodes = " << cfg.dataset_episodes << "\n"
     << "out = " << cfg.out << "\n"
     << "learner = " << cfg.learner << "\n"
     << "eval_episodes = " << cfg.eval_episodes << "\n"
     << "seed = " << t.seed << "\n";
  if (!cfg.seeds.empty()) os << "seeds = " << join(cfg.seeds) << "\n";
  os << "beta = " << fmt_double(t.beta) << "\n"
     << "clip = " << fmt_double(t.clip) << "\n"
     << "polyak = " << fmt_double(t.polyak) << "\n"
     << "update_delay = " << t.update_delay << "\n"
     << "modes = " << t.num_modes << "\n"
     << "gamma = " << fmt_double(t.gamma) << "\n"
     << "iters_mdn = " << t.iters_mdn << "\n"
     << "iters_main = " << t.iters_main << "\n"
     << "mc_samples = " << t.mc_samples << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "hidden = " << join(t.hidden) << "\n"
     << "lr = " << fmt_double(t.lr) << "\n"
     << "log_every = " << cfg.log_every << "\n"
     << "eval_every = " << cfg.eval_every << "\n";
  return os.str();
}

}  // namespace lom::config
