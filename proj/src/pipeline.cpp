#include "lom/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "lom/checkpoint.hpp"
#include "lom/errors.hpp"
#include "lom/numkit/adam.hpp"
#include "lom/oracle.hpp"

namespace lom::pipeline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_num(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_field(std::string_view f, std::size_t line) {
  if (f.empty()) return kNaN;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size())
    throw FormatError("metrics.csv line " + std::to_string(line) + ": bad number '" +
                      std::string(f) + "'");
  return v;
}

bool wants(const std::vector<std::string>& learners, std::string_view name) {
  return std::find(learners.begin(), learners.end(), name) != learners.end();
}

// Aborts after kDivergencePatience consecutive bad losses.
class DivergenceGuard {
 public:
  explicit DivergenceGuard(std::string name) : name_(std::move(name)) {}

  template <typename F>
  double run(F&& step) {
    double loss = kNaN;
    std::string why;
    try {
      loss = step();
    } catch (const DivergenceError& e) {
      why = e.what();
    }
    if (std::isfinite(loss) && loss <= kDivergenceLoss) {
      bad_ = 0;
      return loss;
    }
    if (++bad_ >= kDivergencePatience) {
      if (why.empty()) why = "loss " + fmt_num(loss);
      throw DivergenceError(name_ + " diverged for " + std::to_string(bad_) +
                            " consecutive steps (" + why + ")");
    }
    return loss;
  }

 private:
  std::string name_;
  std::size_t bad_ = 0;
};

// Running mean of the losses seen since the last metrics row.
struct Accumulator {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double take() {
    const double out = n ? sum / static_cast<double>(n) : kNaN;
    sum = 0.0;
    n = 0;
    return out;
  }
};

double action_scale(const envs::Env& env) {
  double s = 0.0;
  for (std::size_t i = 0; i < env.action_dim(); ++i)
    s = std::max({s, std::abs(env.action_low()[i]), std::abs(env.action_high()[i])});
  return s;
}

void check_dims(const envs::Dataset& data, const envs::Env& env) {
  if (data.state_dim != env.state_dim() || data.action_dim != env.action_dim())
    throw UsageError("dataset dimensions (" + std::to_string(data.state_dim) + ", " +
                     std::to_string(data.action_dim) + ") do not match env '" + env.name() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  os << text;
}

checkpoint::Header header_for(checkpoint::NetKind kind, std::size_t m, const envs::Env& env) {
  return {kind, static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(env.state_dim()),
          static_cast<std::uint32_t>(env.action_dim())};
}

void save_models(const std::filesystem::path& dir, const Models& models, const envs::Env& env,
                 std::size_t num_modes) {
  using checkpoint::NetKind;
  std::filesystem::create_directories(dir);
  if (models.mdn)
    checkpoint::save(dir / "mdn.ckpt", header_for(NetKind::mdn, num_modes, env), models.mdn->net());
  if (models.q) checkpoint::save(dir / "q.ckpt", header_for(NetKind::q, 0, env), models.q->net());
  if (models.q_target)
    checkpoint::save(dir / "q_target.ckpt", header_for(NetKind::q_target, 0, env),
                     models.q_target->net());
  if (models.hq)
    checkpoint::save(dir / "hyperq.ckpt", header_for(NetKind::hyperq, num_modes, env),
                     models.hq->net());
  for (const auto& [name, pi] : models.policies)
    checkpoint::save(dir / ("policy_" + name + ".ckpt"), header_for(NetKind::policy, 0, env),
                     pi.net());
}

}  // namespace

MetricsRow::MetricsRow()
    : loss_mdn(kNaN), loss_q(kNaN), loss_hyperq(kNaN), loss_policy(kNaN), eval_mean_return(kNaN) {}

std::string to_csv(const MetricsRow& r) {
  return std::to_string(r.step) + "," + fmt_num(r.loss_mdn) + "," + fmt_num(r.loss_q) + "," +
         fmt_num(r.loss_hyperq) + "," + fmt_num(r.loss_policy) + "," +
         fmt_num(r.eval_mean_return) + "," + std::to_string(r.seed);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader)
    throw FormatError("metrics.csv: unexpected header");
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto pos = rest.find(',');
      f.push_back(rest.substr(0, pos));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (f.size() != 7)
      throw FormatError("metrics.csv line " + std::to_string(line_no) + ": expected 7 fields");
    MetricsRow r;
    std::uint64_t step = 0, seed = 0;
    auto parse_uint = [&](std::string_view s, std::uint64_t& out) {
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
        throw FormatError("metrics.csv line " + std::to_string(line_no) + ": bad integer");
    };
    parse_uint(f[0], step);
    parse_uint(f[6], seed);
    r.step = step;
    r.seed = seed;
    r.loss_mdn = parse_field(f[1], line_no);
    r.loss_q = parse_field(f[2], line_no);
    r.loss_hyperq = parse_field(f[3], line_no);
    r.loss_policy = parse_field(f[4], line_no);
    r.eval_mean_return = parse_field(f[5], line_no);
    rows.push_back(r);
  }
  return rows;
}

TrainResult train_models(const envs::Dataset& data, const envs::Env& env,
                         const config::RunConfig& cfg, const std::vector<std::string>& learners,
                         const TrainHooks& hooks) {
  const auto& tc = cfg.train;
  tc.validate();
  data.validate();
  check_dims(data, env);
  for (const auto& l : learners)
    if (!wants(config::learner_names(), l)) throw ConfigError("unknown learner '" + l + "'");
  if (learners.empty()) throw ConfigError("no learner requested");

  const bool need_hq = wants(learners, "lom");
  const bool need_q = need_hq || wants(learners, "awac");
  const bool need_mdn = need_q || wants(learners, "mdn");
  std::vector<std::string> policy_names;
  for (const auto& l : learners)
    if (l != "mdn" && !wants(policy_names, l)) policy_names.push_back(l);

  const std::size_t sd = env.state_dim();
  const std::size_t ad = env.action_dim();
  const numkit::AdamOptions opts{tc.lr};
  const numkit::Rng train_rng = numkit::Rng(tc.seed).split("train");

  TrainResult result;
  Models& m = result.models;
  const std::string& primary = learners.front();
  const auto log_every = cfg.log_every;

  auto emit = [&](MetricsRow row) {
    row.seed = tc.seed;
    result.metrics.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
  };

  // MDN phase, then frozen.
  std::size_t step = 0;
  if (need_mdn) {
    auto init_rng = train_rng.split("init.mdn");
    m.mdn.emplace(sd, ad, tc.num_modes, tc.hidden);
    m.mdn->init(init_rng, action_scale(env));
    numkit::AdamState adam(m.mdn->net().num_params(), opts);
    auto batch_rng = train_rng.split("mdn.batch");
    DivergenceGuard guard("mdn");
    Accumulator acc;
    for (std::size_t i = 0; i < tc.iters_mdn; ++i) {
      const auto rows = envs::sample_rows(data, tc.batch_size, batch_rng);
      const auto b = envs::gather(data, rows);
      const double loss = guard.run([&] {
        auto lg = mdn::mdn_loss(*m.mdn, b.s, b.a);
        numkit::adam_step(adam, m.mdn->net().params(), lg.grad);
        return lg.loss;
      });
      if (std::isfinite(loss)) acc.add(loss);
      ++step;
      if (step % log_every == 0 || i + 1 == tc.iters_mdn) {
        MetricsRow row;
        row.step = step;
        row.loss_mdn = acc.take();
        emit(row);
        spdlog::debug("step {} mdn loss {}", step, row.loss_mdn);
      }
    }
    spdlog::info("mdn phase done after {} steps", tc.iters_mdn);
    if (hooks.on_checkpoint) hooks.on_checkpoint(m, step);
  }

  if (!policy_names.empty()) {
    std::optional<numkit::AdamState> q_adam, hq_adam;
    if (need_q) {
      auto init_rng = train_rng.split("init.q");
      m.q.emplace(sd, ad, tc.hidden);
      m.q->net().init(init_rng);
      m.q_target = m.q;
      q_adam.emplace(m.q->net().num_params(), opts);
    }
    if (need_hq) {
      auto init_rng = train_rng.split("init.hyperq");
      m.hq.emplace(sd, tc.num_modes, tc.hidden);
      m.hq->net().init(init_rng);
      hq_adam.emplace(m.hq->net().num_params(), opts);
    }
    std::vector<numkit::AdamState> pi_adam;
    std::vector<numkit::Rng> pi_rng;
    std::vector<DivergenceGuard> pi_guard;
    for (const auto& name : policy_names) {
      auto init_rng = train_rng.split("init.policy." + name);
      learners::GaussianPolicy pi(sd, ad, tc.hidden, env.action_low(), env.action_high());
      pi.net().init(init_rng);
      pi_adam.emplace_back(pi.net().num_params(), opts);
      pi_rng.push_back(train_rng.split("policy." + name));
      pi_guard.emplace_back("policy." + name);
      m.policies.emplace(name, std::move(pi));
    }
    auto batch_rng = train_rng.split("batch");
    auto hq_rng = train_rng.split("hyperq");
    DivergenceGuard q_guard("q"), hq_guard("hyperq");
    Accumulator q_acc, hq_acc, pi_acc;
    const std::size_t primary_index =
        primary == "mdn" ? policy_names.size() : static_cast<std::size_t>(
            std::find(policy_names.begin(), policy_names.end(), primary) - policy_names.begin());

    for (std::size_t i = 0; i < tc.iters_main; ++i) {
      const auto rows = envs::sample_rows(data, tc.batch_size, batch_rng);
      const auto b = envs::gather(data, rows);
      if (need_q) {
        const double loss = q_guard.run([&] {
          auto lg = valuefn::td_loss(*m.q, *m.q_target, b, tc.gamma);
          numkit::adam_step(*q_adam, m.q->net().params(), lg.grad);
          return lg.loss;
        });
        if (std::isfinite(loss)) q_acc.add(loss);
      }
      if (need_hq) {
        const double loss = hq_guard.run([&] {
          auto lg = hyperq::hyperq_loss(*m.hq, *m.q, *m.mdn, b.s, hq_rng, tc.mc_samples);
          numkit::adam_step(*hq_adam, m.hq->net().params(), lg.grad);
          return lg.loss;
        });
        if (std::isfinite(loss)) hq_acc.add(loss);
      }
      for (std::size_t p = 0; p < policy_names.size(); ++p) {
        const auto& name = policy_names[p];
        auto& pi = m.policies.at(name);
        const double loss = pi_guard[p].run([&] {
          numkit::LossGrad lg;
          if (name == "lom") {
            const hyperq::GreedyPolicy gp(*m.mdn, *m.hq);
            lg = learners::lom_policy_update(pi, gp, *m.q, b.s, tc, pi_rng[p]);
          } else if (name == "bc") {
            lg = learners::bc_update(pi, b.s, b.a);
          } else {
            lg = learners::awac_update(pi, *m.q, *m.mdn, b.s, b.a, tc);
          }
          numkit::adam_step(pi_adam[p], pi.net().params(), lg.grad);
          return lg.loss;
        });
        if (p == primary_index && std::isfinite(loss)) pi_acc.add(loss);
      }
      if (need_q && (i + 1) % tc.update_delay == 0) {
        valuefn::polyak_update(*m.q_target, *m.q, tc.polyak);
        ++result.target_updates;
      }
      ++step;
      const bool last = i + 1 == tc.iters_main;
      const bool eval_now = hooks.on_eval && cfg.eval_every > 0 && step % cfg.eval_every == 0 && !last;
      if (step % log_every == 0 || last || eval_now) {
        MetricsRow row;
        row.step = step;
        row.loss_q = q_acc.take();
        row.loss_hyperq = hq_acc.take();
        row.loss_policy = pi_acc.take();
        if (eval_now) row.eval_mean_return = hooks.on_eval(m, step);
        emit(row);
        spdlog::debug("step {} q {} hyperq {} policy {}", step, row.loss_q, row.loss_hyperq,
                      row.loss_policy);
        if (hooks.on_checkpoint) hooks.on_checkpoint(m, step);
      }
    }
    spdlog::info("main phase done after {} steps, {} target updates", tc.iters_main,
                 result.target_updates);
  }
  return result;
}

envs::Dataset make_dataset(const config::RunConfig& cfg, const envs::Env& env) {
  if (!cfg.dataset.empty()) {
    auto d = envs::load_dataset(cfg.dataset);
    check_dims(d, env);
    return d;
  }
  auto rng = numkit::Rng(cfg.train.seed).split("dataset");
  return envs::collect_multimodal_dataset(env, cfg.dataset_episodes, rng);
}

learners::PolicyFn policy_for(const Models& models, const std::string& learner) {
  if (learner == "mdn") {
    if (!models.mdn) throw UsageError("no MDN was trained");
    return learners::mdn_policy_eval_adapter(*models.mdn);
  }
  const auto it = models.policies.find(learner);
  if (it == models.policies.end()) throw UsageError("no policy trained for learner '" + learner + "'");
  return learners::mean_action_policy(it->second);
}

learners::EvalReport evaluate_learner(const Models& models, const std::string& learner,
                                      const envs::Env& env, std::size_t episodes,
                                      std::uint64_t seed) {
  auto rng = numkit::Rng(seed).split("eval").split(learner);
  auto report = learners::evaluate_policy(env, policy_for(models, learner), episodes, rng, learner);
  report.seed = seed;
  return report;
}

learners::EvalReport run_training(const config::RunConfig& cfg) {
  cfg.validate();
  const auto env = envs::Env::make(cfg.env);
  const std::filesystem::path out(cfg.out);
  std::filesystem::create_directories(out / "checkpoints");
  write_text(out / "config.txt", config::to_text(cfg));

  const auto data = make_dataset(cfg, env);
  spdlog::info("dataset: {} transitions ({})", data.size(), data.provenance);

  std::ofstream csv(out / "metrics.csv", std::ios::trunc);
  if (!csv) throw Error("cannot write metrics.csv");
  csv << kMetricsHeader << "\n";

  TrainHooks hooks;
  hooks.on_row = [&](const MetricsRow& r) { csv << to_csv(r) << "\n" << std::flush; };
  hooks.on_checkpoint = [&](const Models& m, std::size_t) {
    save_models(out / "checkpoints", m, env, cfg.train.num_modes);
  };
  hooks.on_eval = [&](const Models& m, std::size_t step) {
    auto rng = numkit::Rng(cfg.train.seed).split("eval.progress").split(step);
    return learners::evaluate_policy(env, policy_for(m, cfg.learner), cfg.eval_episodes, rng)
        .mean_return;
  };

  auto result = train_models(data, env, cfg, {cfg.learner}, hooks);
  save_models(out / "checkpoints", result.models, env, cfg.train.num_modes);

  auto report = evaluate_learner(result.models, cfg.learner, env, cfg.eval_episodes, cfg.train.seed);
  MetricsRow final_row;
  final_row.step = result.metrics.empty() ? 0 : result.metrics.back().step;
  final_row.eval_mean_return = report.mean_return;
  final_row.seed = cfg.train.seed;
  csv << to_csv(final_row) << "\n";

  nlohmann::json manifest{
      {"artifact_version", kArtifactVersion},
      {"seed", cfg.train.seed},
      {"learner", cfg.learner},
      {"env", cfg.env},
      {"dataset", cfg.dataset.empty() ? data.provenance : cfg.dataset},
      {"dataset_transitions", data.size()},
      {"iters_mdn", cfg.train.iters_mdn},
      {"iters_main", cfg.train.iters_main},
      {"update_delay", cfg.train.update_delay},
      {"target_updates", result.target_updates},
      {"eval_episodes", cfg.eval_episodes},
      {"eval_mean_return", report.mean_return},
      {"eval_std_error", report.std_error()},
  };
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return report;
}

learners::EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint_path,
                                         const std::string& env_name, std::size_t episodes,
                                         std::uint64_t seed) {
  using checkpoint::NetKind;
  if (episodes == 0) throw UsageError("episodes must be >= 1");
  const auto env = envs::Env::make(env_name);
  auto path = checkpoint_path;
  if (std::filesystem::is_directory(path)) {
    // A run directory: pick the learner recorded in its manifest.
    std::ifstream is(path / "manifest.json");
    if (!is) throw UsageError("'" + path.string() + "' has no manifest.json");
    const auto manifest = nlohmann::json::parse(is, nullptr, false);
    if (manifest.is_discarded() || !manifest.contains("learner"))
      throw FormatError("unreadable manifest in '" + path.string() + "'");
    const auto learner = manifest["learner"].get<std::string>();
    path = path / "checkpoints" / (learner == "mdn" ? "mdn.ckpt" : "policy_" + learner + ".ckpt");
  }
  auto loaded = checkpoint::load(path);
  const auto& h = loaded.header;
  if (h.state_dim != env.state_dim() || h.action_dim != env.action_dim())
    throw UsageError("checkpoint dimensions (" + std::to_string(h.state_dim) + ", " +
                     std::to_string(h.action_dim) + ") do not match env '" + env.name() + "' (" +
                     std::to_string(env.state_dim()) + ", " + std::to_string(env.action_dim()) + ")");

  auto rng = numkit::Rng(seed).split("eval").split(checkpoint::to_string(h.kind));
  learners::EvalReport report;
  switch (h.kind) {
    case NetKind::policy: {
      learners::GaussianPolicy pi(std::move(loaded.net), env.action_low(), env.action_high());
      report = learners::evaluate_policy(env, learners::mean_action_policy(pi), episodes, rng,
                                         "policy");
      break;
    }
    case NetKind::mdn: {
      mdn::MdnNet net(std::move(loaded.net), h.action_dim, h.num_modes);
      report = learners::evaluate_policy(env, learners::mdn_policy_eval_adapter(net), episodes,
                                         rng, "mdn");
      break;
    }
    case NetKind::hyperq: {
      auto mdn_loaded = checkpoint::load(path.parent_path() / "mdn.ckpt");
      if (mdn_loaded.header.num_modes != h.num_modes)
        throw FormatError("hyperq and mdn checkpoints disagree on the mode count");
      mdn::MdnNet net(std::move(mdn_loaded.net), h.action_dim, h.num_modes);
      hyperq::HyperQNet hq(std::move(loaded.net));
      const hyperq::GreedyPolicy gp(net, hq);
      report = learners::evaluate_policy(env, learners::greedy_mode_policy(gp), episodes, rng,
                                         "greedy_mode");
      break;
    }
    default:
      throw UsageError(std::string("a '") + checkpoint::to_string(h.kind) +
                       "' checkpoint is not a policy");
  }
  report.seed = seed;
  return report;
}

std::vector<std::vector<double>> centre_states(const envs::Env& env) {
  std::vector<std::vector<double>> out;
  const double offsets[] = {-0.25, 0.0, 0.25};
  if (env.state_dim() == 1) {
    for (double x : offsets) out.push_back({x});
    return out;
  }
  for (double x : offsets)
    for (double y : offsets) {
      std::vector<double> s(env.state_dim(), 0.0);
      s[0] = x;
      s[1] = y;
      out.push_back(std::move(s));
    }
  return out;
}

double selected_sigma(const mdn::MdnNet& net, const hyperq::HyperQNet& hq, const envs::Env& env) {
  const auto states = centre_states(env);
  double sum = 0.0;
  for (const auto& s : states) {
    const auto p = mdn::decode(net, s);
    sum += p.sigmas[hyperq::select_mode(hq, s)];
  }
  return sum / static_cast<double>(states.size());
}

std::string to_csv(const SweepRow& r) {
  std::string err = r.error;
  std::replace(err.begin(), err.end(), ',', ';');
  std::replace(err.begin(), err.end(), '\n', ' ');
  return std::to_string(r.num_modes) + "," + std::to_string(r.seed) + "," +
         (r.ok ? "ok" : "failed") + "," + (r.ok ? fmt_num(r.mean_return) : "") + "," +
         (r.ok ? fmt_num(r.std_error) : "") + "," + (r.ok ? fmt_num(r.selected_sigma) : "") + "," +
         err;
}

std::vector<SweepRow> sweep_modes(const config::RunConfig& cfg, std::vector<std::size_t> modes,
                                  const std::function<void(const SweepRow&)>& on_row) {
  if (modes.empty()) throw UsageError("sweep-modes needs at least one mode count");
  std::vector<std::size_t> unique;
  for (auto m : modes)
    if (std::find(unique.begin(), unique.end(), m) == unique.end()) unique.push_back(m);
  const auto seeds = cfg.seeds.empty() ? std::vector<std::uint64_t>{cfg.train.seed} : cfg.seeds;
  const auto env = envs::Env::make(cfg.env);

  std::vector<SweepRow> rows;
  for (auto seed : seeds) {
    auto base = cfg;
    base.train.seed = seed;
    std::optional<envs::Dataset> data;
    std::string data_error;
    try {
      data = make_dataset(base, env);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
    for (auto m : unique) {
      SweepRow row;
      row.num_modes = m;
      row.seed = seed;
      try {
        if (!data) throw Error(data_error);
        auto c = base;
        c.train.num_modes = m;
        auto result = train_models(*data, env, c, {"lom"});
        const auto report = evaluate_learner(result.models, "lom", env, c.eval_episodes, seed);
        row.mean_return = report.mean_return;
        row.std_error = report.std_error();
        row.selected_sigma = selected_sigma(*result.models.mdn, *result.models.hq, env);
        row.ok = true;
        spdlog::info("sweep M={} seed={} return={} sigma={}", m, seed, row.mean_return,
                     row.selected_sigma);
      } catch (const std::exception& e) {
        row.error = e.what();
        spdlog::error("sweep M={} seed={} failed: {}", m, seed, row.error);
      }
      if (on_row) on_row(row);
      rows.push_back(row);
    }
  }
  return rows;
}

VerifyOutcome verify_theorems(std::size_t instances, std::uint64_t first_seed) {
  if (instances == 0) throw UsageError("instance count must be >= 1");
  const std::vector<double> betas{0.5, 5.0, 50.0};
  constexpr double kLimitBeta = 1e6;

  std::size_t p1_pass = 0, t1_pass = 0, t2_pass = 0, t3_pass = 0, t3_skip = 0;
  double p1_max = 0.0, t1_min_gap = std::numeric_limits<double>::infinity(), t1_max_gap = 0.0;
  double t2_max_violation = 0.0, t2_limit_gap = 0.0;
  double t3_min_slack = std::numeric_limits<double>::infinity();
  nlohmann::json failures = nlohmann::json::array();
  std::vector<std::uint64_t> seeds;

  for (std::size_t i = 0; i < instances; ++i) {
    const std::uint64_t seed = first_seed + i;
    seeds.push_back(seed);
    const auto mdp = oracle::random_instance(seed);

    const auto hq = oracle::exact_hyper_q(mdp, mdp.alpha);
    p1_max = std::max(p1_max, hq.max_abs_diff);
    if (hq.max_abs_diff < oracle::kTheoremTolerance) ++p1_pass;
    else failures.push_back({{"check", "hyper_q_identity"}, {"seed", seed}, {"instance", oracle::serialize(mdp)}});

    const auto t1 = oracle::verify_theorem1(mdp);
    t1_min_gap = std::min(t1_min_gap, t1.min_gap);
    t1_max_gap = std::max(t1_max_gap, t1.max_gap);
    if (t1.passed) ++t1_pass;
    else failures.push_back({{"check", "greedy_improvement"}, {"seed", seed}, {"instance", t1.instance}});

    bool t2_ok = true, t3_ok = true, t3_skipped = false;
    for (double beta : betas) {
      const auto t2 = oracle::verify_theorem2(mdp, beta);
      t2_max_violation = std::max(t2_max_violation, t2.max_violation);
      if (!t2.passed) {
        t2_ok = false;
        failures.push_back({{"check", "lagrangian_chain"}, {"seed", seed}, {"beta", beta}, {"instance", t2.instance}});
      }
      const auto t3 = oracle::verify_theorem3(mdp, beta);
      if (t3.skipped) {
        t3_skipped = true;
        continue;
      }
      t3_min_slack = std::min(t3_min_slack, t3.min_slack);
      if (!t3.passed) {
        t3_ok = false;
        failures.push_back({{"check", "improvement_bound"}, {"seed", seed}, {"beta", beta}, {"instance", t3.instance}});
      }
    }
    const auto limit = oracle::verify_theorem2(mdp, kLimitBeta);
    t2_limit_gap = std::max(t2_limit_gap, limit.star_minus_greedy.cwiseAbs().maxCoeff());
    if (t2_ok) ++t2_pass;
    if (t3_skipped) ++t3_skip;
    else if (t3_ok) ++t3_pass;
  }

  const bool p1_ok = p1_pass == instances;
  const bool t1_ok = t1_pass == instances;
  const bool t2_ok = t2_pass == instances;
  const bool t3_ok = t3_pass + t3_skip == instances;
  VerifyOutcome out;
  out.all_passed = p1_ok && t1_ok && t2_ok && t3_ok;
  out.report = {
      {"instances", instances},
      {"seeds", seeds},
      {"tolerance", oracle::kTheoremTolerance},
      {"hyper_q_identity", {{"passed", p1_pass}, {"max_abs_diff", p1_max}}},
      {"greedy_improvement", {{"passed", t1_pass}, {"min_gap", t1_min_gap}, {"max_gap", t1_max_gap}}},
      {"lagrangian_chain",
       {{"passed", t2_pass},
        {"betas", betas},
        {"max_violation", t2_max_violation},
        {"limit_beta", kLimitBeta},
        {"limit_max_gap", t2_limit_gap}}},
      {"improvement_bound",
       {{"passed", t3_pass},
        {"skipped", t3_skip},
        {"betas", betas},
        {"min_slack", std::isfinite(t3_min_slack) ? nlohmann::json(t3_min_slack) : nlohmann::json()}}},
      {"failures", failures},
      {"all_passed", out.all_passed},
  };
  return out;
}

}  // namespace lom::pipeline
