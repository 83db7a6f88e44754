// Command-line front end for the reaching pipeline: dataset generation,
// perception/control training, end-to-end fine-tuning, evaluation, scene
// rendering, and gradient verification.
//
// Exit codes: 0 success, 2 usage error, 3 data/model error, 4 verification
// failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "modreach/checkpoint.hpp"
#include "modreach/config.hpp"
#include "modreach/control.hpp"
#include "modreach/dataset.hpp"
#include "modreach/e2e.hpp"
#include "modreach/gradcheck.hpp"
#include "modreach/io.hpp"
#include "modreach/metrics.hpp"
#include "modreach/perception.hpp"
#include "modreach/render.hpp"
#include "modreach/training_state.hpp"

namespace fs = std::filesystem;
using namespace modreach;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path,
                  "config file (default: $MODREACH_CONFIG when set)");
  cmd->add_option("--set", c.sets, "override a config key, e.g. --set control.lr_start=0.002")
      ->type_name("KEY=VALUE");
  cmd->add_option("--seed", c.seed, "rng seed")->capture_default_str();
}

RunConfig build_config(const Common& c) {
  RunConfig cfg;
  std::string path = c.config_path;
  if (path.empty())
    if (const char* env = std::getenv("MODREACH_CONFIG")) path = env;
  if (!path.empty()) cfg.load_file(path);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

// Every command drops the full effective config next to its outputs.
void echo_config(const RunConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir.empty() ? fs::path(".") : out_dir);
  cfg.echo_to(((out_dir.empty() ? fs::path(".") : out_dir) / "effective.cfg").string());
}

std::string sidecar_path(std::string ckpt) {
  const std::string ext = ".ckpt";
  if (ckpt.size() > ext.size() && ckpt.compare(ckpt.size() - ext.size(), ext.size(), ext) == 0)
    ckpt.resize(ckpt.size() - ext.size());
  return ckpt + ".state";
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

Occluder parse_occluder(const std::string& text) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t pos = 0;
    v.push_back(std::stoi(item, &pos));
    if (pos != item.size()) throw std::invalid_argument("--occlude: bad number '" + item + "'");
  }
  if (v.size() != 4) throw std::invalid_argument("--occlude expects x0,y0,x1,y1");
  if (v[0] < 0 || v[1] < 0 || v[2] <= v[0] || v[3] <= v[1])
    throw std::invalid_argument("--occlude: need 0 <= x0 < x1 and 0 <= y0 < y1");
  return Occluder{v[0], v[1], v[2], v[3], 0.5f};
}

Dataset load_required_dataset(const std::string& path, const std::string& what) {
  if (path.empty()) throw std::invalid_argument(what + " dataset path is required");
  return load_dataset(path);
}

// Evaluation episodes are independent rng streams, so they can be dealt
// round-robin to worker threads; each worker gets its own network copies.
template <typename MakePick>
EvalStats eval_parallel(const ArmModel& m, int episodes, uint64_t seed, int workers,
                        MakePick&& make) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  workers = std::max(1, std::min(workers, episodes));
  if (workers == 1) {
    auto pick = make();
    return evaluate_policy(m, episodes, seed, pick);
  }
  std::vector<EpisodeOutcome> outs(static_cast<size_t>(episodes));
  std::vector<std::thread> pool;
  pool.reserve(size_t(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      auto pick = make();
      for (int i = t; i < episodes; i += workers) {
        Rng rng = Rng::stream(seed, uint64_t(i));
        outs[size_t(i)] = run_episode(m, sample_scene(m, rng), pick);
      }
    });
  }
  for (auto& th : pool) th.join();
  return aggregate(outs);
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataArgs {
  Common common;
  std::string out;
  int64_t count = -1;
  std::string style;
  int dof = -1;
  bool augment = false;
  bool occlude = false;
};

int run_gen_data(const GenDataArgs& a, const CLI::App* cmd) {
  RunConfig cfg = build_config(a.common);
  if (cmd->count("--count")) cfg.set("data.count", std::to_string(a.count));
  if (cmd->count("--style")) cfg.set("data.style", a.style);
  if (cmd->count("--dof")) cfg.set("arm.dof", std::to_string(a.dof));
  if (cmd->count("--augment")) cfg.set("data.augment", "true");
  if (cmd->count("--occlude")) cfg.set("data.occluders", "true");

  const int64_t count = cfg.get_int("data.count");
  if (count < 1) throw std::invalid_argument("--count must be a positive integer");
  const ArmModel arm = arm_from_config(cfg);
  const RenderStyle style = style_from_string(cfg.get("data.style"));

  const Dataset ds = gen_dataset(arm, int(count), style, a.common.seed,
                                 cfg.get_bool("data.augment"), augment_from_config(cfg),
                                 cfg.get_bool("data.occluders"), render_from_config(cfg));
  save_dataset(a.out, ds);
  echo_config(cfg, fs::path(a.out).parent_path());
  std::cout << "wrote " << count << " samples style " << to_string(style) << " dof " << arm.dof
            << " -> " << a.out << "\n";
  std::cout << "checksum " << hex64(file_checksum(a.out)) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-perception
// ---------------------------------------------------------------------------

struct TrainPerceptionArgs {
  Common common;
  std::string out;
  std::string data_a, data_b, eval_a, eval_b;
  std::string resume;
  int64_t steps = -1;
  double mix = -1;
  int dof = -1;
  int64_t checkpoint_every = 10000;
};

int run_train_perception(const TrainPerceptionArgs& a, const CLI::App* cmd) {
  RunConfig cfg = build_config(a.common);
  if (cmd->count("--steps")) cfg.set("perception.steps", std::to_string(a.steps));
  if (cmd->count("--mix")) cfg.set("perception.mix", std::to_string(a.mix));
  if (cmd->count("--dof")) cfg.set("arm.dof", std::to_string(a.dof));

  PerceptionTrainOpts opts;
  opts.steps = cfg.get_int("perception.steps");
  opts.batch = int(cfg.get_int("perception.batch"));
  opts.lr_start = cfg.get_double("perception.lr_start");
  opts.lr_end = cfg.get_double("perception.lr_end");
  opts.mix.p_real = cfg.get_double("perception.mix");
  opts.eval_every = cfg.get_int("perception.eval_every");
  opts.stop_err = cfg.get_double("perception.stop_err");
  opts.trace_every = cfg.get_int("perception.trace_every");
  if (opts.mix.p_real < 0 || opts.mix.p_real > 1)
    throw std::invalid_argument("--mix must lie in [0,1]");

  Dataset ds_a, ds_b, ev_a, ev_b;
  const bool has_a = !a.data_a.empty(), has_b = !a.data_b.empty();
  if (has_a) ds_a = load_dataset(a.data_a);
  if (has_b) ds_b = load_dataset(a.data_b);
  if (!has_a && !has_b) throw std::invalid_argument("need --data-a and/or --data-b");
  const bool has_ev_a = !a.eval_a.empty(), has_ev_b = !a.eval_b.empty();
  if (has_ev_a) ev_a = load_dataset(a.eval_a);
  if (has_ev_b) ev_b = load_dataset(a.eval_b);

  fs::create_directories(a.out);
  echo_config(cfg, a.out);

  Network net;
  OptimizerState opt;
  Rng rng(a.common.seed);
  int64_t start_step = 0;
  if (!a.resume.empty()) {
    Checkpoint ck = load_checkpoint(a.resume);
    if (!ck.opt) throw std::runtime_error("resume checkpoint lacks optimizer state: " + a.resume);
    net = std::move(ck.net);
    opt = std::move(*ck.opt);
    start_step = load_perception_state(sidecar_path(a.resume), rng);
    if (start_step != ck.step)
      throw std::runtime_error("checkpoint and train-state step disagree for " + a.resume);
  } else {
    const int dof = int(cfg.get_int("arm.dof"));
    net = Network(NetworkSpec::perception(dof));
    net.init_weights(rng);
    opt = OptimizerState(net);
  }
  const int td = net.spec.output_dim();
  if (has_a && ds_a.theta_dim() != td)
    throw std::runtime_error("style-A labels have dim " + std::to_string(ds_a.theta_dim()) +
                             ", network expects " + std::to_string(td));
  if (has_b && ds_b.theta_dim() != td)
    throw std::runtime_error("style-B labels have dim " + std::to_string(ds_b.theta_dim()) +
                             ", network expects " + std::to_string(td));

  std::ofstream curve((fs::path(a.out) / "curve.csv").string(),
                      start_step > 0 ? std::ios::app : std::ios::trunc);
  if (!curve) throw std::runtime_error("cannot open curve.csv for write");
  if (curve.tellp() == std::ofstream::pos_type(0)) curve << "step,loss,err_a,err_b\n";
  std::ofstream trace((fs::path(a.out) / "loss.csv").string(),
                      start_step > 0 ? std::ios::app : std::ios::trunc);
  if (!trace) throw std::runtime_error("cannot open loss.csv for write");
  if (trace.tellp() == std::ofstream::pos_type(0)) trace << "step,loss\n";

  const std::string last_ckpt = (fs::path(a.out) / "last.ckpt").string();
  auto save_last = [&](int64_t step) {
    save_checkpoint(last_ckpt, net, step, a.common.seed, &opt);
    save_perception_state(sidecar_path(last_ckpt), rng, step);
  };
  auto on_eval = [&](const PerceptionEvalPoint& pt) {
    curve << pt.step << ',' << fmt_double(pt.loss) << ',' << fmt_double(pt.err_a) << ','
          << fmt_double(pt.err_b) << '\n';
    curve.flush();
    std::cout << "step=" << pt.step << " loss=" << fmt_double(pt.loss)
              << " err_a=" << fmt_double(pt.err_a) << " err_b=" << fmt_double(pt.err_b) << "\n";
  };

  const auto res = train_perception(net, opt, rng, has_a ? &ds_a : nullptr,
                                    has_b ? &ds_b : nullptr, opts, has_ev_a ? &ev_a : nullptr,
                                    has_ev_b ? &ev_b : nullptr, on_eval, start_step, save_last,
                                    a.checkpoint_every);
  for (const auto& [step, loss] : res.loss_trace)
    trace << step << ',' << fmt_double(loss) << '\n';

  const std::string final_ckpt = (fs::path(a.out) / "perception.ckpt").string();
  save_checkpoint(final_ckpt, net, res.steps_run, a.common.seed, &opt);
  save_perception_state(sidecar_path(final_ckpt), rng, res.steps_run);
  std::cout << "trained " << res.steps_run << " steps -> " << final_ckpt << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train-control
// ---------------------------------------------------------------------------

struct TrainControlArgs {
  Common common;
  std::string out;
  std::string resume;
  std::string method;
  int dof = -1;
  int64_t steps = -1;
  int64_t checkpoint_every = 25000;
};

int run_train_control(const TrainControlArgs& a, const CLI::App* cmd) {
  RunConfig cfg = build_config(a.common);
  if (cmd->count("--steps")) cfg.set("control.updates", std::to_string(a.steps));
  if (cmd->count("--method")) cfg.set("control.method", a.method);
  if (cmd->count("--dof")) cfg.set("arm.dof", std::to_string(a.dof));

  const ArmModel arm = arm_from_config(cfg);
  ControlTrainOpts opts;
  opts.updates = cfg.get_int("control.updates");
  opts.batch = int(cfg.get_int("control.batch"));
  opts.lr_start = cfg.get_double("control.lr_start");
  opts.lr_end = cfg.get_double("control.lr_end");
  opts.gamma = cfg.get_double("control.gamma");
  opts.replay_capacity = size_t(cfg.get_int("control.replay"));
  opts.warmup = cfg.get_int("control.warmup");
  opts.target_sync = cfg.get_int("control.target_sync");
  opts.explore.eps_start = cfg.get_double("control.eps_start");
  opts.explore.eps_end = cfg.get_double("control.eps_end");
  const int64_t decay = cfg.get_int("control.eps_decay");
  opts.explore.decay_steps = decay > 0 ? decay : std::max<int64_t>(1, opts.updates * 6 / 10);
  opts.kgps = method_is_kgps(cfg.get("control.method"));
  opts.seed = a.common.seed;
  opts.eval_every = cfg.get_int("control.eval_every");
  opts.eval_episodes = int(cfg.get_int("control.eval_episodes"));
  opts.stop_success = cfg.get_double("control.stop_success");

  fs::create_directories(a.out);
  echo_config(cfg, a.out);

  ControlTrainer tr(arm, opts);
  if (!a.resume.empty()) {
    Checkpoint ck = load_checkpoint(a.resume);
    if (!ck.opt) throw std::runtime_error("resume checkpoint lacks optimizer state: " + a.resume);
    if (!(ck.net.spec == tr.net.spec))
      throw std::runtime_error("resume checkpoint is for a different network layout");
    tr.net = std::move(ck.net);
    tr.opt = std::move(*ck.opt);
    load_control_state(sidecar_path(a.resume), tr);
    if (tr.updates_done != ck.step)
      throw std::runtime_error("checkpoint and train-state step disagree for " + a.resume);
  }

  CurveWriter curve;
  const std::string curve_path = (fs::path(a.out) / "curve.csv").string();
  if (tr.updates_done > 0)
    curve.open_append(curve_path);
  else
    curve.open(curve_path);

  const std::string last_ckpt = (fs::path(a.out) / "last.ckpt").string();
  auto on_eval = [&](const ControlEvalPoint& pt) {
    curve.row(pt.update, pt.stats, pt.epsilon);
    std::cout << "update=" << pt.update << " eps=" << fmt_double(pt.epsilon)
              << " loss=" << fmt_double(pt.loss)
              << " success=" << fmt_double(pt.stats.success_rate)
              << " d_med=" << fmt_double(pt.stats.d_med_cm) << "cm\n";
  };
  auto save_last = [&](int64_t step) {
    save_checkpoint(last_ckpt, tr.net, step, a.common.seed, &tr.opt);
    save_control_state(sidecar_path(last_ckpt), tr);
  };

  tr.run(opts.updates, on_eval, save_last, a.checkpoint_every);

  const std::string final_ckpt = (fs::path(a.out) / "control.ckpt").string();
  save_checkpoint(final_ckpt, tr.net, tr.updates_done, a.common.seed, &tr.opt);
  save_control_state(sidecar_path(final_ckpt), tr);
  std::cout << "trained " << tr.updates_done << " updates (" << tr.env_steps << " env steps"
            << (tr.stop_hit ? ", early stop" : "") << ") -> " << final_ckpt << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// finetune
// ---------------------------------------------------------------------------

struct FinetuneArgs {
  Common common;
  std::string out;
  std::string perception_ckpt, control_ckpt;
  std::string data_a, data_b;
  std::string resume;
  std::string method, style;
  int64_t steps = -1;
  double beta = -1;
  bool naive = false;
  int64_t checkpoint_every = 2000;
};

int run_finetune(const FinetuneArgs& a, const CLI::App* cmd) {
  RunConfig cfg = build_config(a.common);
  if (cmd->count("--steps")) cfg.set("finetune.updates", std::to_string(a.steps));
  if (cmd->count("--beta")) cfg.set("finetune.beta", std::to_string(a.beta));
  if (cmd->count("--method")) cfg.set("finetune.method", a.method);
  if (cmd->count("--style")) cfg.set("finetune.style", a.style);
  if (cmd->count("--naive")) cfg.set("finetune.naive", "true");

  Checkpoint per_ck = load_checkpoint(a.perception_ckpt);
  Checkpoint ctl_ck = load_checkpoint(a.control_ckpt);
  check_combinable(per_ck.net, ctl_ck.net);
  const int dof = per_ck.net.spec.output_dim() - 2;
  if (cfg.overridden("arm.dof") && cfg.get_int("arm.dof") != dof)
    throw std::invalid_argument("arm.dof conflicts with the checkpoints (nets are " +
                                std::to_string(dof) + " dof)");
  cfg.set("arm.dof", std::to_string(dof));
  const ArmModel arm = arm_from_config(cfg);

  FinetuneOpts opts;
  opts.updates = cfg.get_int("finetune.updates");
  opts.beta = cfg.get_double("finetune.beta");
  opts.q_batch = int(cfg.get_int("finetune.q_batch"));
  opts.per_batch_b = int(cfg.get_int("finetune.per_batch_b"));
  opts.per_batch_a = int(cfg.get_int("finetune.per_batch_a"));
  opts.lr_start = cfg.get_double("finetune.lr_start");
  opts.lr_end = cfg.get_double("finetune.lr_end");
  opts.gamma = cfg.get_double("finetune.gamma");
  opts.replay_capacity = size_t(cfg.get_int("finetune.replay"));
  opts.warmup = cfg.get_int("finetune.warmup");
  opts.target_sync = cfg.get_int("finetune.target_sync");
  opts.explore_eps = cfg.get_double("finetune.eps");
  opts.kgps = method_is_kgps(cfg.get("finetune.method"));
  opts.style = style_from_string(cfg.get("finetune.style"));
  opts.render = render_from_config(cfg);
  opts.naive = cfg.get_bool("finetune.naive");
  opts.seed = a.common.seed;
  opts.eval_every = cfg.get_int("finetune.eval_every");
  opts.eval_episodes = int(cfg.get_int("finetune.eval_episodes"));

  Dataset ds_a, ds_b;
  if (!opts.naive) {
    if (opts.per_batch_b > 0) ds_b = load_required_dataset(a.data_b, "style-B");
    if (opts.per_batch_a > 0) ds_a = load_required_dataset(a.data_a, "style-A");
  }

  fs::create_directories(a.out);
  echo_config(cfg, a.out);

  FinetuneTrainer tr(arm, std::move(per_ck.net), std::move(ctl_ck.net), opts,
                     opts.per_batch_b > 0 && !opts.naive ? &ds_b : nullptr,
                     opts.per_batch_a > 0 && !opts.naive ? &ds_a : nullptr);

  // Resume restores the nets, optimizers, and step; the replay buffer refills
  // through a fresh warmup, so resumed runs are continuations rather than
  // bit-exact replays.
  if (!a.resume.empty()) {
    Checkpoint rp = load_checkpoint((fs::path(a.resume) / "last_perception.ckpt").string());
    Checkpoint rc = load_checkpoint((fs::path(a.resume) / "last_control.ckpt").string());
    if (!rp.opt || !rc.opt) throw std::runtime_error("resume checkpoints lack optimizer state");
    if (rp.step != rc.step) throw std::runtime_error("resume checkpoints disagree on step");
    tr.per = std::move(rp.net);
    tr.ctl = std::move(rc.net);
    tr.opt_per = std::move(*rp.opt);
    tr.opt_ctl = std::move(*rc.opt);
    tr.per_target = tr.per;
    tr.ctl_target = tr.ctl;
    tr.updates_done = rp.step;
    tr.rng = Rng(opts.seed ^ (0x517cc1b727220a95ull * uint64_t(rp.step + 1)));
  }

  CurveWriter curve;
  const std::string curve_path = (fs::path(a.out) / "curve.csv").string();
  if (tr.updates_done > 0)
    curve.open_append(curve_path);
  else
    curve.open(curve_path);
  std::ofstream losses((fs::path(a.out) / "losses.csv").string(),
                       tr.updates_done > 0 ? std::ios::app : std::ios::trunc);
  if (!losses) throw std::runtime_error("cannot open losses.csv for write");
  if (losses.tellp() == std::ofstream::pos_type(0)) losses << "step,loss_q,loss_p\n";

  auto on_eval = [&](const FinetuneEvalPoint& pt) {
    curve.row(pt.update, pt.stats, opts.explore_eps);
    losses << pt.update << ',' << fmt_double(pt.loss_q) << ',' << fmt_double(pt.loss_p) << '\n';
    losses.flush();
    std::cout << "update=" << pt.update << " loss_q=" << fmt_double(pt.loss_q)
              << " loss_p=" << fmt_double(pt.loss_p)
              << " success=" << fmt_double(pt.stats.success_rate)
              << " d_med=" << fmt_double(pt.stats.d_med_cm) << "cm\n";
  };
  auto save_last = [&](int64_t step) {
    save_checkpoint((fs::path(a.out) / "last_perception.ckpt").string(), tr.per, step,
                    a.common.seed, &tr.opt_per);
    save_checkpoint((fs::path(a.out) / "last_control.ckpt").string(), tr.ctl, step, a.common.seed,
                    &tr.opt_ctl);
  };

  tr.run(opts.updates, on_eval, save_last, a.checkpoint_every);

  save_checkpoint((fs::path(a.out) / "perception.ckpt").string(), tr.per, tr.updates_done,
                  a.common.seed, &tr.opt_per);
  save_checkpoint((fs::path(a.out) / "control.ckpt").string(), tr.ctl, tr.updates_done,
                  a.common.seed, &tr.opt_ctl);
  std::cout << "finetuned " << tr.updates_done << " updates -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string mode;
  std::string net, perception_ckpt, control_ckpt;
  std::string data;
  std::string out = "report.csv";
  std::string style;
  int episodes = -1;
  int workers = -1;
  std::vector<std::string> occlude;
};

int run_eval(const EvalArgs& a, const CLI::App* cmd) {
  RunConfig cfg = build_config(a.common);
  if (cmd->count("--episodes")) cfg.set("eval.episodes", std::to_string(a.episodes));
  if (cmd->count("--style")) cfg.set("eval.style", a.style);
  if (cmd->count("--workers")) cfg.set("eval.workers", std::to_string(a.workers));

  std::vector<Occluder> occs;
  for (const auto& s : a.occlude) occs.push_back(parse_occluder(s));

  if (a.mode == "perception") {
    if (a.net.empty()) throw std::invalid_argument("--mode perception needs --net");
    Checkpoint ck = load_checkpoint(a.net);
    Dataset ds = load_required_dataset(a.data, "evaluation");
    if (ck.net.spec.output_dim() != ds.theta_dim())
      throw std::runtime_error("network and dataset disagree on label dimension");
    const PerceptionEval ev = eval_perception(ck.net, ds);
    echo_config(cfg, fs::path(a.out).parent_path());
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for write: " + a.out);
    f << "net,style,count,e_mu,e_sigma\n";
    f << stem_of(a.net) << ',' << to_string(ds.style) << ',' << ds.size() << ','
      << fmt_double(ev.e_mu) << ',' << fmt_double(ev.e_sigma) << '\n';
    std::cout << "e_mu=" << fmt_double(ev.e_mu) << " e_sigma=" << fmt_double(ev.e_sigma)
              << " over " << ds.size() << " samples -> " << a.out << "\n";
    return 0;
  }

  const int episodes = int(cfg.get_int("eval.episodes"));
  if (episodes < 1) throw std::invalid_argument("--episodes must be a positive integer");
  const int workers = int(cfg.get_int("eval.workers"));
  if (workers < 1) throw std::invalid_argument("--workers must be a positive integer");

  if (a.mode == "control") {
    if (a.net.empty()) throw std::invalid_argument("--mode control needs --net");
    Checkpoint ck = load_checkpoint(a.net);
    const int dof = ck.net.spec.input_dim() - 2;
    if (dof < 1 || dof > 3 || ck.net.spec.output_dim() != 3 * dof)
      throw std::runtime_error("checkpoint is not a control network");
    if (cfg.overridden("arm.dof") && cfg.get_int("arm.dof") != dof)
      throw std::invalid_argument("arm.dof conflicts with the checkpoint");
    cfg.set("arm.dof", std::to_string(dof));
    const ArmModel arm = arm_from_config(cfg);
    const EvalStats st =
        eval_parallel(arm, episodes, a.common.seed, workers, [&] {
          return [&arm, net = ck.net](const EpisodeState& s) mutable {
            return greedy_action(arm, net, s.scene);
          };
        });
    echo_config(cfg, fs::path(a.out).parent_path());
    ReportWriter rep(a.out);
    rep.row(stem_of(a.net), "-", st);
    std::cout << "success=" << fmt_double(st.success_rate) << " d_med=" << fmt_double(st.d_med_cm)
              << "cm d_q3=" << fmt_double(st.d_q3_cm) << "cm avg_reward="
              << fmt_double(st.avg_reward) << " over " << episodes << " episodes -> " << a.out
              << "\n";
    return 0;
  }

  if (a.mode == "e2e") {
    if (a.perception_ckpt.empty() || a.control_ckpt.empty())
      throw std::invalid_argument("--mode e2e needs --perception and --control");
    Checkpoint per_ck = load_checkpoint(a.perception_ckpt);
    Checkpoint ctl_ck = load_checkpoint(a.control_ckpt);
    check_combinable(per_ck.net, ctl_ck.net);
    const int dof = per_ck.net.spec.output_dim() - 2;
    if (cfg.overridden("arm.dof") && cfg.get_int("arm.dof") != dof)
      throw std::invalid_argument("arm.dof conflicts with the checkpoints");
    cfg.set("arm.dof", std::to_string(dof));
    const ArmModel arm = arm_from_config(cfg);
    const RenderStyle style = style_from_string(cfg.get("eval.style"));
    const RenderConfig rc = render_from_config(cfg);
    const EvalStats st = eval_parallel(arm, episodes, a.common.seed, workers, [&] {
      return [&arm, &occs, &rc, style, per = per_ck.net,
              ctl = ctl_ck.net](const EpisodeState& s) mutable {
        const Image img = render_scene(arm, s.scene, style, occs, rc);
        return greedy_visual_action(arm, per, ctl, obs_tensor(img));
      };
    });
    echo_config(cfg, fs::path(a.out).parent_path());
    ReportWriter rep(a.out);
    rep.row(stem_of(a.perception_ckpt) + "+" + stem_of(a.control_ckpt), to_string(style), st);
    std::cout << "success=" << fmt_double(st.success_rate) << " d_med=" << fmt_double(st.d_med_cm)
              << "cm (" << fmt_double(st.d_med_px()) << "px) d_q3=" << fmt_double(st.d_q3_cm)
              << "cm avg_reward=" << fmt_double(st.avg_reward) << " over " << episodes
              << " episodes -> " << a.out << "\n";
    return 0;
  }

  throw std::invalid_argument("unknown --mode '" + a.mode +
                              "' (expected perception, control, or e2e)");
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderArgs {
  Common common;
  std::string scene;
  std::string style;
  std::string out;
  int dof = -1;
  std::vector<std::string> occlude;
};

int run_render(const RenderArgs& a, const CLI::App* cmd) {
  RunConfig cfg = build_config(a.common);
  if (cmd->count("--style")) cfg.set("eval.style", a.style);
  if (cmd->count("--dof")) cfg.set("arm.dof", std::to_string(a.dof));

  const ArmModel arm = arm_from_config(cfg);
  const SceneConfig scene = parse_scene_literal(a.scene, arm);
  const RenderStyle style = style_from_string(cfg.get("eval.style"));
  std::vector<Occluder> occs;
  for (const auto& s : a.occlude) occs.push_back(parse_occluder(s));

  const Image img = render_scene(arm, scene, style, occs, render_from_config(cfg));
  write_pgm(a.out, img);
  echo_config(cfg, fs::path(a.out).parent_path());
  std::cout << "wrote " << img.w << "x" << img.h << " style " << to_string(style) << " -> "
            << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckArgs {
  Common common;
  double tol = 1e-4;
  int dof = 3;
};

int run_gradcheck(const GradcheckArgs& a) {
  const auto reports = gradcheck_all(a.common.seed, a.dof);
  double worst = 0;
  bool ok = true;
  for (const auto& r : reports) {
    const bool pass = r.pass(a.tol);
    ok = ok && pass;
    worst = std::max(worst, r.max_rel_err);
    std::cout << (pass ? "  ok  " : " FAIL ") << r.name << ": " << r.checked
              << " checks, max rel err " << fmt_double(r.max_rel_err) << "\n";
  }
  std::cout << "max relative error " << fmt_double(worst) << " (tolerance " << fmt_double(a.tol)
            << "): " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visually guided reaching: data, training, evaluation"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "render a labelled image dataset");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--out", gen.out, "output dataset path (.mdset)")->required();
  gen_cmd->add_option("--count", gen.count, "number of samples");
  gen_cmd->add_option("--style", gen.style, "render style, A or B");
  gen_cmd->add_option("--dof", gen.dof, "active joints, 1..3");
  gen_cmd->add_flag("--augment", gen.augment, "bake rotation/shift/noise jitter into the images");
  gen_cmd->add_flag("--occlude", gen.occlude, "cover a random patch of every image");

  TrainPerceptionArgs tp;
  auto* tp_cmd = app.add_subcommand("train-perception", "train the image-to-state regressor");
  add_common(tp_cmd, tp.common);
  tp_cmd->add_option("--out", tp.out, "output directory")->required();
  tp_cmd->add_option("--data-a", tp.data_a, "style-A training dataset");
  tp_cmd->add_option("--data-b", tp.data_b, "style-B training dataset");
  tp_cmd->add_option("--eval-a", tp.eval_a, "style-A held-out dataset");
  tp_cmd->add_option("--eval-b", tp.eval_b, "style-B held-out dataset");
  tp_cmd->add_option("--steps", tp.steps, "gradient updates to run");
  tp_cmd->add_option("--mix", tp.mix, "style-B share per batch, 0..1");
  tp_cmd->add_option("--dof", tp.dof, "active joints, 1..3");
  tp_cmd->add_option("--resume", tp.resume, "checkpoint to continue from");
  tp_cmd->add_option("--checkpoint-every", tp.checkpoint_every, "steps between checkpoints")
      ->capture_default_str();

  TrainControlArgs tc;
  auto* tc_cmd = app.add_subcommand("train-control", "Q-learning on scene configurations");
  add_common(tc_cmd, tc.common);
  tc_cmd->add_option("--out", tc.out, "output directory")->required();
  tc_cmd->add_option("--dof", tc.dof, "active joints, 1..3");
  tc_cmd->add_option("--method", tc.method, "exploration: kgps or egreedy");
  tc_cmd->add_option("--steps", tc.steps, "gradient updates to run");
  tc_cmd->add_option("--resume", tc.resume, "checkpoint to continue from");
  tc_cmd->add_option("--checkpoint-every", tc.checkpoint_every, "updates between checkpoints")
      ->capture_default_str();

  FinetuneArgs ft;
  auto* ft_cmd = app.add_subcommand("finetune", "joint refinement of both networks");
  add_common(ft_cmd, ft.common);
  ft_cmd->add_option("--out", ft.out, "output directory")->required();
  ft_cmd->add_option("--perception", ft.perception_ckpt, "perception checkpoint")->required();
  ft_cmd->add_option("--control", ft.control_ckpt, "control checkpoint")->required();
  ft_cmd->add_option("--data-a", ft.data_a, "style-A labelled corpus");
  ft_cmd->add_option("--data-b", ft.data_b, "style-B labelled corpus");
  ft_cmd->add_option("--steps", ft.steps, "gradient updates to run");
  ft_cmd->add_option("--beta", ft.beta, "regression weight in the perception update, 0..1");
  ft_cmd->add_flag("--naive", ft.naive, "task loss only, no regression term");
  ft_cmd->add_option("--method", ft.method, "guidance: kgps or egreedy");
  ft_cmd->add_option("--style", ft.style, "interaction render style, A or B");
  ft_cmd->add_option("--resume", ft.resume, "output directory of the run to continue");
  ft_cmd->add_option("--checkpoint-every", ft.checkpoint_every, "updates between checkpoints")
      ->capture_default_str();

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev_cmd, ev.common);
  ev_cmd->add_option("--mode", ev.mode, "perception, control, or e2e")->required();
  ev_cmd->add_option("--net", ev.net, "checkpoint (perception/control modes)");
  ev_cmd->add_option("--perception", ev.perception_ckpt, "perception checkpoint (e2e)");
  ev_cmd->add_option("--control", ev.control_ckpt, "control checkpoint (e2e)");
  ev_cmd->add_option("--data", ev.data, "held-out dataset (perception mode)");
  ev_cmd->add_option("--out", ev.out, "report csv path")->capture_default_str();
  ev_cmd->add_option("--style", ev.style, "render style for e2e rollouts");
  ev_cmd->add_option("--episodes", ev.episodes, "evaluation episodes");
  ev_cmd->add_option("--workers", ev.workers, "parallel evaluation threads");
  ev_cmd->add_option("--occlude", ev.occlude, "occluder x0,y0,x1,y1 (repeatable, e2e)");

  RenderArgs rd;
  auto* rd_cmd = app.add_subcommand("render", "render one scene to a PGM image");
  add_common(rd_cmd, rd.common);
  rd_cmd->add_option("--scene", rd.scene, "scene literal, e.g. \"q=0.1,0.2,-0.3;target=0.45,0.20\"")
      ->required();
  rd_cmd->add_option("--style", rd.style, "render style, A or B");
  rd_cmd->add_option("--out", rd.out, "output PGM path")->required();
  rd_cmd->add_option("--dof", rd.dof, "active joints, 1..3");
  rd_cmd->add_option("--occlude", rd.occlude, "occluder x0,y0,x1,y1 (repeatable)");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(gc_cmd, gc.common);
  gc_cmd->add_option("--tol", gc.tol, "max relative error allowed")->capture_default_str();
  gc_cmd->add_option("--dof", gc.dof, "dof for the assembled networks")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen, gen_cmd);
    if (tp_cmd->parsed()) return run_train_perception(tp, tp_cmd);
    if (tc_cmd->parsed()) return run_train_control(tc, tc_cmd);
    if (ft_cmd->parsed()) return run_finetune(ft, ft_cmd);
    if (ev_cmd->parsed()) return run_eval(ev, ev_cmd);
    if (rd_cmd->parsed()) return run_render(rd, rd_cmd);
    if (gc_cmd->parsed()) return run_gradcheck(gc);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
