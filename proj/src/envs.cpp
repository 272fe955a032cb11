#include "lom/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lom/binio.hpp"
#include "lom/errors.hpp"

namespace lom::envs {

namespace {

constexpr std::array<std::array<double, 2>, 4> kUnitCorners{
    {{1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}, {-1.0, 1.0}}};

// onestep expert: two clusters on each side of zero for every state
constexpr std::array<double, 4> kOneStepCentres{-0.85, -0.55, 0.55, 0.85};
constexpr double kOneStepSigma = 0.05;

double dist2d(std::span<const double> p, const std::array<double, 2>& q) {
  return std::hypot(p[0] - q[0], p[1] - q[1]);
}

}  // namespace

Env Env::reach2d(double goal_radius, std::size_t horizon) {
  if (!(goal_radius > 0.0)) throw ConfigError("reach2d: goal_radius must be positive");
  if (horizon == 0) throw ConfigError("reach2d: horizon must be positive");
  Env e;
  e.kind_ = EnvKind::reach2d;
  e.name_ = "reach2d";
  e.state_dim_ = 2;
  e.action_dim_ = 2;
  e.horizon_ = horizon;
  e.goal_radius_ = goal_radius;
  e.action_low_ = {-kReachMaxStep, -kReachMaxStep};
  e.action_high_ = {kReachMaxStep, kReachMaxStep};
  e.state_ = {0.0, 0.0};
  return e;
}

Env Env::onestep() {
  Env e;
  e.kind_ = EnvKind::onestep;
  e.name_ = "onestep";
  e.state_dim_ = 1;
  e.action_dim_ = 1;
  e.horizon_ = 1;
  e.action_low_ = {-1.0};
  e.action_high_ = {1.0};
  e.state_ = {0.0};
  return e;
}

Env Env::four_cluster() {
  Env e;
  e.kind_ = EnvKind::four_cluster;
  e.name_ = "four_cluster";
  e.state_dim_ = 2;
  e.action_dim_ = 2;
  e.horizon_ = 1;
  e.goal_radius_ = kClusterRewardRadius;
  e.action_low_ = {-kClusterActionBound, -kClusterActionBound};
  e.action_high_ = {kClusterActionBound, kClusterActionBound};
  e.state_ = {0.0, 0.0};
  return e;
}

std::vector<std::string> Env::names() { return {"reach2d", "onestep", "four_cluster"}; }

Env Env::make(std::string_view name) {
  if (name == "reach2d") return reach2d();
  if (name == "onestep") return onestep();
  if (name == "four_cluster") return four_cluster();
  std::string msg = "unknown env '" + std::string(name) + "'; valid names:";
  for (const auto& n : names()) msg += " " + n;
  throw UsageError(msg);
}

std::vector<std::array<double, 2>> Env::targets() const {
  std::vector<std::array<double, 2>> out;
  if (kind_ == EnvKind::onestep) return out;
  const double scale = kind_ == EnvKind::reach2d ? kReachGoalScale : 1.0;
  for (const auto& c : kUnitCorners) out.push_back({scale * c[0], scale * c[1]});
  return out;
}

std::vector<double> Env::clip_action(std::span<const double> action) const {
  if (action.size() != action_dim_) throw ConfigError(name_ + ": action dimension mismatch");
  std::vector<double> a(action.begin(), action.end());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], action_low_[i], action_high_[i]);
  return a;
}

std::vector<double> Env::reset(numkit::Rng& rng) {
  t_ = 0;
  switch (kind_) {
    case EnvKind::reach2d: {
      const auto goals = targets();
      for (;;) {
        state_ = {rng.uniform(-kReachStartExtent, kReachStartExtent),
                  rng.uniform(-kReachStartExtent, kReachStartExtent)};
        const bool near_goal = std::any_of(goals.begin(), goals.end(), [&](const auto& g) {
          return dist2d(state_, g) <= 2.0 * goal_radius_;
        });
        if (!near_goal) break;
      }
      break;
    }
    case EnvKind::onestep:
      state_ = {rng.uniform(-1.0, 1.0)};
      break;
    case EnvKind::four_cluster:
      state_ = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      break;
  }
  return state_;
}

void Env::reset_to(std::span<const double> state) {
  if (state.size() != state_dim_) throw ConfigError(name_ + ": state dimension mismatch");
  state_.assign(state.begin(), state.end());
  t_ = 0;
}

double Env::reach_reward(bool& done) const {
  const auto goals = targets();
  for (std::size_t g = 0; g < goals.size(); ++g) {
    if (dist2d(state_, goals[g]) <= goal_radius_) {
      done = true;
      return g == 0 ? 2.0 : 1.0;
    }
  }
  return 0.0;
}

StepResult Env::step(std::span<const double> action) {
  const auto a = clip_action(action);
  StepResult res;
  ++t_;
  switch (kind_) {
    case EnvKind::reach2d: {
      for (std::size_t i = 0; i < 2; ++i)
        state_[i] = std::clamp(state_[i] + a[i], -kReachArena, kReachArena);
      res.reward = reach_reward(res.done);
      if (t_ >= horizon_) res.done = true;
      break;
    }
    case EnvKind::onestep:
      res.reward = state_[0] * a[0] > 0.0 ? 1.0 : 0.0;
      res.done = true;
      break;
    case EnvKind::four_cluster: {
      const auto centres = targets();
      for (std::size_t c = 0; c < centres.size(); ++c) {
        if (dist2d(a, centres[c]) <= kClusterRewardRadius) {
          res.reward = c == 0 ? 2.0 : 1.0;
          break;
        }
      }
      res.done = true;
      break;
    }
  }
  res.state = state_;
  return res;
}

void Dataset::validate() const {
  if (transitions.empty()) throw FormatError("dataset is empty");
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    if (t.s.size() != state_dim || t.s_next.size() != state_dim || t.a.size() != action_dim ||
        t.a_next.size() != action_dim)
      throw FormatError("record " + std::to_string(i) + ": dimension mismatch");
    if (!std::isfinite(t.r)) throw FormatError("record " + std::to_string(i) + ": non-finite reward");
  }
}

Batch gather(const Dataset& d, std::span<const std::size_t> rows) {
  Batch b;
  const std::size_t n = rows.size();
  b.s.resize(n, d.state_dim);
  b.s_next.resize(n, d.state_dim);
  b.a.resize(n, d.action_dim);
  b.a_next.resize(n, d.action_dim);
  b.r.resize(n);
  b.done.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Transition& t = d.transitions[rows[i]];
    std::copy(t.s.begin(), t.s.end(), b.s.row(i).begin());
    std::copy(t.s_next.begin(), t.s_next.end(), b.s_next.row(i).begin());
    std::copy(t.a.begin(), t.a.end(), b.a.row(i).begin());
    std::copy(t.a_next.begin(), t.a_next.end(), b.a_next.row(i).begin());
    b.r[i] = t.r;
    b.done[i] = t.done;
  }
  return b;
}

std::vector<std::size_t> sample_rows(const Dataset& d, std::size_t batch, numkit::Rng& rng) {
  if (d.transitions.empty()) throw UsageError("sample_rows: empty dataset");
  std::vector<std::size_t> rows(batch);
  for (auto& r : rows) r = static_cast<std::size_t>(rng.index(d.transitions.size()));
  return rows;
}

std::vector<double> reach_expert_action(const Env& env, std::size_t goal, numkit::Rng* rng) {
  const auto g = env.targets().at(goal);
  const auto& s = env.state();
  const double dx = g[0] - s[0];
  const double dy = g[1] - s[1];
  const double norm = std::max(std::hypot(dx, dy), 1e-12);
  std::vector<double> a{kExpertGain * dx / norm, kExpertGain * dy / norm};
  if (rng != nullptr)
    for (double& v : a) v += kExpertNoise * rng->normal();
  return env.clip_action(a);
}

Dataset collect_multimodal_dataset(const Env& env_in, std::size_t episodes, numkit::Rng& rng) {
  if (episodes == 0) throw UsageError("collect_multimodal_dataset: episodes must be >= 1");
  Env env = env_in;
  Dataset d;
  d.state_dim = env.state_dim();
  d.action_dim = env.action_dim();
  d.provenance = "generator=" + env.name() + " episodes=" + std::to_string(episodes) +
                 " seed=" + std::to_string(rng.seed());

  // reach2d goals come in shuffled blocks of four, so every goal is equally
  // represented and any four consecutive episodes cover all of them
  std::array<std::size_t, 4> goal_order{0, 1, 2, 3};
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    const std::size_t first = d.transitions.size();
    if (env.kind() == EnvKind::reach2d && ep % 4 == 0)
      for (std::size_t i = goal_order.size(); i > 1; --i)
        std::swap(goal_order[i - 1], goal_order[rng.index(i)]);
    auto s = env.reset(rng);
    switch (env.kind()) {
      case EnvKind::reach2d: {
        const std::size_t goal = goal_order[ep % 4];
        for (;;) {
          auto a = reach_expert_action(env, goal, &rng);
          auto res = env.step(a);
          d.transitions.push_back({s, a, res.reward, res.state, {}, res.done});
          if (res.done) break;
          s = res.state;
        }
        break;
      }
      case EnvKind::onestep: {
        const double c = kOneStepCentres[rng.index(kOneStepCentres.size())];
        auto a = env.clip_action(std::vector<double>{c + kOneStepSigma * rng.normal()});
        auto res = env.step(a);
        d.transitions.push_back({s, a, res.reward, res.state, {}, true});
        break;
      }
      case EnvKind::four_cluster: {
        const auto centres = env.targets();
        const auto& c = centres[rng.index(centres.size())];
        auto a = env.clip_action(std::vector<double>{c[0] + kClusterSigma * rng.normal(),
                                                     c[1] + kClusterSigma * rng.normal()});
        auto res = env.step(a);
        d.transitions.push_back({s, a, res.reward, res.state, {}, true});
        break;
      }
    }
    // a' is the next action of the same trajectory; zero after a terminal
    for (std::size_t i = first; i < d.transitions.size(); ++i) {
      auto& t = d.transitions[i];
      if (t.done)
        t.a_next.assign(d.action_dim, 0.0);
      else
        t.a_next = d.transitions[i + 1].a;
    }
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  d.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os.write("LOMD", 4);
  binio::put_u32(os, kDatasetVersion);
  binio::put_u32(os, static_cast<std::uint32_t>(d.state_dim));
  binio::put_u32(os, static_cast<std::uint32_t>(d.action_dim));
  binio::put_u64(os, d.transitions.size());
  binio::put_u32(os, static_cast<std::uint32_t>(d.provenance.size()));
  binio::put_bytes(os, d.provenance);
  for (const auto& t : d.transitions) {
    for (double v : t.s) binio::put_f64(os, v);
    for (double v : t.a) binio::put_f64(os, v);
    binio::put_f64(os, t.r);
    for (double v : t.s_next) binio::put_f64(os, v);
    for (double v : t.a_next) binio::put_f64(os, v);
    binio::put_u8(os, t.done ? 1 : 0);
  }
  if (!os) throw Error("write failed for '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open dataset '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "LOMD")
    throw FormatError("'" + path.string() + "' is not a dataset file (bad magic)");
  std::uint32_t version = 0, sd = 0, ad = 0, plen = 0;
  std::uint64_t count = 0;
  if (!binio::get_u32(is, version)) throw FormatError("dataset header truncated");
  if (version != kDatasetVersion)
    throw UnsupportedVersionError("unsupported dataset version " + std::to_string(version) +
                                  " (expected " + std::to_string(kDatasetVersion) + ")");
  Dataset d;
  if (!binio::get_u32(is, sd) || !binio::get_u32(is, ad) || !binio::get_u64(is, count) ||
      !binio::get_u32(is, plen) || !binio::get_bytes(is, plen, d.provenance))
    throw FormatError("dataset header truncated");
  if (sd == 0 || ad == 0) throw FormatError("dataset header has zero dimension");
  d.state_dim = sd;
  d.action_dim = ad;
  d.transitions.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));

  auto read_vec = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    for (double& x : v)
      if (!binio::get_f64(is, x)) return false;
    return true;
  };
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    std::uint8_t done = 0;
    if (!read_vec(t.s, sd) || !read_vec(t.a, ad) || !binio::get_f64(is, t.r) ||
        !read_vec(t.s_next, sd) || !read_vec(t.a_next, ad) || !binio::get_u8(is, done))
      throw FormatError("dataset truncated at record " + std::to_string(i) + " of " +
                        std::to_string(count));
    if (done > 1) throw FormatError("record " + std::to_string(i) + ": invalid done flag");
    t.done = done == 1;
    d.transitions.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after record " + std::to_string(count));
  d.validate();
  return d;
}

}  // namespace lom::envs
