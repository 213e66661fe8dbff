// lvegan: train a level generator, sample and mutate levels, search its latent
// space, play levels with the A* agent and render them.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lve/cmaes.hpp"
#include "lve/corpus.hpp"
#include "lve/fitness.hpp"
#include "lve/gan/model_io.hpp"
#include "lve/gan/train.hpp"
#include "lve/latent_io.hpp"
#include "lve/render.hpp"
#include "lve/sim/astar.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kIo = 3, kNumeric = 4 };

/// Resolved configuration, written as an INI section that --config can replay.
class Manifest {
 public:
  explicit Manifest(std::string section) : section_(std::move(section)) {}

  void add(const std::string& key, const std::string& value) { entries_.emplace_back(key, '"' + value + '"'); }
  void add(const std::string& key, double value) { entries_.emplace_back(key, lve::format_number(value)); }
  void add(const std::string& key, long value) { entries_.emplace_back(key, std::to_string(value)); }
  void add(const std::string& key, int value) { entries_.emplace_back(key, std::to_string(value)); }
  void add(const std::string& key, std::uint64_t value) { entries_.emplace_back(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { entries_.emplace_back(key, value ? "true" : "false"); }

  void write(const fs::path& dir) const {
    std::ofstream out(dir / "run_config.ini", std::ios::trunc);
    if (!out) throw lve::IoError("cannot write " + (dir / "run_config.ini").string());
    out << "# replay with: lvegan --config run_config.ini " << section_ << "\n[" << section_ << "]\n";
    for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
  }

 private:
  std::string section_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw lve::IoError("cannot create output directory " + dir);
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw lve::IoError("cannot write " + path.string());
  return out;
}

void write_level(const lve::TileGrid& level, const fs::path& stem, const std::string& format) {
  if (format == "ascii" || format == "both") lve::save_vglc(level, stem.string() + ".txt");
  if (format == "image" || format == "both") lve::render::to_image(level, {}, stem.string() + ".png");
}

std::string numbered(const std::string& prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return prefix + buf;
}

std::vector<double> to_vector(const lve::cma::Vector& v) { return {v.data(), v.data() + v.size()}; }

lve::cma::Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const lve::cma::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const std::vector<std::string> kFormats{"ascii", "image", "both"};

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, out_dir = "out/train";
  lve::gan::TrainConfig cfg;
  int log_every = 100;
  bool export_windows = false;
};

void run_train(const TrainArgs& a) {
  a.cfg.validate();
  const lve::TileGrid level = lve::load_vglc(a.corpus);
  const fs::path dir = prepare_dir(a.out_dir);
  std::vector<lve::TrainingWindow> windows;
  for (const auto& w : lve::slide_windows(level)) windows.push_back(lve::encode_window(w));
  std::cerr << "training on " << windows.size() << " windows from " << a.corpus << '\n';
  if (a.export_windows) {
    std::ofstream out(dir / "windows.lfw", std::ios::binary | std::ios::trunc);
    if (!out) throw lve::IoError("cannot write windows.lfw");
    lve::write_windows(out, windows);
  }

  Manifest m("train");
  m.add("corpus", a.corpus);
  m.add("out-dir", a.out_dir);
  m.add("iterations", a.cfg.iterations);
  m.add("batch", a.cfg.batch_size);
  m.add("lr", a.cfg.lr);
  m.add("critic-steps", a.cfg.critic_steps);
  m.add("clip", a.cfg.clip);
  m.add("seed", a.cfg.seed);
  m.add("log-every", a.log_every);
  m.add("export-windows", a.export_windows);
  m.write(dir);

  std::ofstream log = open_out(dir / "train_log.csv");
  lve::gan::write_train_log_header(log);
  lve::gan::TrainObserver<float> obs;
  obs.on_iteration = [&](const lve::gan::TrainLogRow& row) {
    lve::gan::write_train_log_row(log, row);
    if (a.log_every > 0 && row.iteration % a.log_every == 0)
      std::cerr << "iteration " << row.iteration << "  W-estimate " << row.wasserstein_estimate << '\n';
  };
  const auto gen = lve::gan::wgan_train<float>(windows, a.cfg, obs);
  lve::gan::save_model(gen, (dir / "generator.lvem").string());
  std::cout << "model written to " << (dir / "generator.lvem").string() << '\n';
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string model, latent, format = "both", out_dir = "out/generate";
  int count = 1;
  std::uint64_t seed = 0;
};

void run_generate(const GenerateArgs& a) {
  if (a.count < 1) throw lve::InputError("--count must be >= 1");
  const auto gen = lve::gan::load_model(a.model);
  std::vector<std::vector<double>> latents;
  if (!a.latent.empty()) {
    latents.push_back(lve::load_latent(a.latent, lve::gan::kLatentDim));
  } else {
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < a.count; ++i) {
      std::vector<double> z(lve::gan::kLatentDim);
      for (double& v : z) v = normal(rng);
      latents.push_back(std::move(z));
    }
  }
  const fs::path dir = prepare_dir(a.out_dir);
  Manifest m("generate");
  m.add("model", a.model);
  if (!a.latent.empty())
    m.add("latent", a.latent);
  else
    m.add("count", a.count);
  m.add("format", a.format);
  m.add("seed", a.seed);
  m.add("out-dir", a.out_dir);
  m.write(dir);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    const fs::path stem = dir / numbered("level_", static_cast<int>(i));
    write_level(lve::fitness::decode_latent(gen, to_eigen(latents[i])), stem, a.format);
    lve::save_latent(latents[i], stem.string() + ".latent");
  }
  std::cout << latents.size() << " level(s) written to " << dir.string() << '\n';
}

// ---------------------------------------------------------------- mutate

struct MutateArgs {
  std::string model, latent, format = "both", out_dir = "out/mutate";
  int count = 5;
  double radius = 0.3;
  std::uint64_t seed = 0;
};

void run_mutate(const MutateArgs& a) {
  if (a.count < 1) throw lve::InputError("--count must be >= 1");
  if (!(a.radius >= 0.0)) throw lve::InputError("--radius must be >= 0");
  const auto gen = lve::gan::load_model(a.model);
  const std::vector<double> parent = lve::load_latent(a.latent, lve::gan::kLatentDim);
  const fs::path dir = prepare_dir(a.out_dir);
  Manifest m("mutate");
  m.add("model", a.model);
  m.add("latent", a.latent);
  m.add("count", a.count);
  m.add("radius", a.radius);
  m.add("format", a.format);
  m.add("seed", a.seed);
  m.add("out-dir", a.out_dir);
  m.write(dir);

  write_level(lve::fitness::decode_latent(gen, to_eigen(parent)), dir / "parent", a.format);
  lve::save_latent(parent, (dir / "parent.latent").string());
  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<double> noise(-a.radius, a.radius);
  for (int i = 0; i < a.count; ++i) {
    std::vector<double> child = parent;
    if (a.radius > 0.0)
      for (double& v : child) v += noise(rng);
    const fs::path stem = dir / numbered("mutant_", i);
    write_level(lve::fitness::decode_latent(gen, to_eigen(child)), stem, a.format);
    lve::save_latent(child, stem.string() + ".latent");
  }
  std::cout << "parent and " << a.count << " mutant(s) written to " << dir.string() << '\n';
}

// ---------------------------------------------------------------- evolve

struct EvolveArgs {
  std::string model, fitness = "ground", plan = "1.0,1.0,0.7,0.7e,0.7e", init, format = "both",
                     out_dir = "out/evolve";
  double target = 1.0;
  double sigma = 0.0;  // 0: fitness-dependent default
  int lambda = 14;
  long max_evals = 1000;
  int repeats = 10;
  std::uint64_t sim_seed_base = 0;
  int tick_limit = 0;
  long max_expansions = lve::sim::AstarConfig{}.max_expansions;
  int workers = 1;
  std::uint64_t seed = 0;
};

void write_history(const fs::path& path, const std::vector<lve::cma::HistoryRow>& rows) {
  std::ofstream out = open_out(path);
  lve::cma::write_history_header(out);
  for (const auto& r : rows) lve::cma::write_history_row(out, r);
}

void run_evolve(EvolveArgs a) {
  const bool agent = a.fitness == "jumps-max" || a.fitness == "jumps-min";
  if (a.init.empty()) a.init = agent ? "random" : "zero";
  if (a.sigma == 0.0) a.sigma = agent ? 2.0 : 1.0;
  if (a.workers < 1) throw lve::InputError("--workers must be >= 1");
  const auto gen = lve::gan::load_model(a.model);
  const fs::path dir = prepare_dir(a.out_dir);

  lve::cma::CmaConfig cfg = a.init == "random" ? lve::cma::agent_config(a.seed) : lve::cma::CmaConfig{};
  cfg.dimension = lve::gan::kLatentDim;
  cfg.lambda = a.lambda;
  cfg.sigma0 = a.sigma;
  cfg.max_evaluations = a.max_evals;
  cfg.seed = a.seed;
  cfg.validate();

  Manifest m("evolve");
  m.add("model", a.model);
  m.add("fitness", a.fitness);
  if (a.fitness == "ground") m.add("target", a.target);
  if (a.fitness == "segments") m.add("plan", a.plan);
  m.add("lambda", a.lambda);
  m.add("sigma", a.sigma);
  m.add("init", a.init);
  m.add("max-evals", a.max_evals);
  if (agent) {
    m.add("repeats", a.repeats);
    m.add("sim-seed-base", a.sim_seed_base);
    m.add("tick-limit", a.tick_limit);
    m.add("max-expansions", a.max_expansions);
  }
  m.add("workers", a.workers);
  m.add("seed", a.seed);
  m.add("format", a.format);
  m.add("out-dir", a.out_dir);

  if (a.fitness == "segments" || a.fitness == "ground") {
    const lve::fitness::SegmentPlan plan =
        a.fitness == "segments" ? lve::fitness::parse_plan(a.plan) : lve::fitness::SegmentPlan{{a.target, false}};
    m.write(dir);
    std::vector<std::ofstream> logs;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      logs.push_back(open_out(dir / (plan.size() == 1 ? "evaluations.csv" : numbered("evaluations_segment_", static_cast<int>(i)) + ".csv")));
      lve::fitness::write_evaluation_header(logs.back());
    }
    lve::fitness::SearchOptions opts;
    opts.workers = a.workers;
    opts.on_evaluation = [&](std::size_t seg, long k, const lve::fitness::Evaluation& e) {
      lve::fitness::write_evaluation_row(logs[seg], k, e);
    };
    const auto out = lve::fitness::evolve_segmented_level(plan, gen, cfg, opts);
    write_level(out.level, dir / "best_level", a.format);
    std::ofstream summary = open_out(dir / "summary.csv");
    summary << "segment,target,enemy_term,best_fitness,ground,ground_error,enemies\n";
    for (std::size_t i = 0; i < out.segments.size(); ++i) {
      const auto& s = out.segments[i];
      const std::string tag = plan.size() == 1 ? "" : numbered("_segment_", static_cast<int>(i));
      write_history(dir / ("history" + tag + ".csv"), s.history);
      lve::save_latent(to_vector(s.latent), (dir / ("best_latent" + tag + ".latent")).string());
      const double g = *s.best.ground;
      summary << i << ',' << s.spec.target << ',' << (s.spec.enemies ? 1 : 0) << ',' << s.best.fitness << ',' << g << ','
              << std::abs(g - s.spec.target) << ',' << *s.best.enemies << '\n';
      std::cout << "segment " << i << ": target " << s.spec.target << (s.spec.enemies ? " +enemies" : "")
                << "  ground " << g << "  |g-t| " << std::abs(g - s.spec.target) << "  enemies " << *s.best.enemies
                << "  fitness " << s.best.fitness << '\n';
    }
    std::cout << "level " << out.level.width() << "x" << out.level.height() << " written to " << dir.string() << '\n';
    return;
  }
  if (!agent) throw lve::InputError("unknown --fitness " + a.fitness);

  lve::fitness::AgentObjective obj;
  obj.variant = a.fitness == "jumps-max" ? lve::fitness::AgentVariant::MaximizeJumps
                                         : lve::fitness::AgentVariant::MinimizeJumps;
  obj.repeats = a.repeats;
  obj.seed_base = a.sim_seed_base;
  obj.astar.tick_limit = a.tick_limit;
  obj.astar.max_expansions = a.max_expansions;
  obj.validate();
  m.write(dir);

  std::ofstream log = open_out(dir / "evaluations.csv");
  lve::fitness::write_evaluation_header(log);
  lve::cma::OptimizeOptions<lve::fitness::Evaluation> opts;
  opts.workers = a.workers;
  opts.on_evaluation = [&](long k, const lve::cma::Vector&, const lve::fitness::Evaluation& e) {
    lve::fitness::write_evaluation_row(log, k, e);
  };
  opts.on_generation = [&](const lve::cma::HistoryRow& row, const lve::cma::CmaState&) {
    if (row.generation % 10 == 0)
      std::cerr << "evaluations " << row.evaluations << "  best " << row.best_fitness << "  mean " << row.mean_fitness
                << '\n';
  };
  const auto r = lve::cma::optimize(
      [&](const lve::cma::Vector& z) { return lve::fitness::agent_fitness(z, gen, obj); }, cfg, opts);
  const lve::cma::Vector input = lve::fitness::squash(r.best);
  write_level(lve::fitness::decode_latent(gen, input), dir / "best_level", a.format);
  lve::save_latent(to_vector(input), (dir / "best_latent.latent").string());
  write_history(dir / "history.csv", r.history);
  std::ofstream summary = open_out(dir / "summary.csv");
  summary << "best_fitness,p_mean,jumps_mean,playable_fraction,evaluations\n"
          << r.best_fitness << ',' << *r.best_record.p_mean << ',' << *r.best_record.jumps_mean << ','
          << *r.best_record.playable_fraction << ',' << r.evaluations << '\n';
  std::cout << "best fitness " << r.best_fitness << "  p " << *r.best_record.p_mean << "  jumps "
            << *r.best_record.jumps_mean << "  playable " << *r.best_record.playable_fraction << '\n';
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string level, out_dir = "out/simulate";
  int seeds = 10;
  std::uint64_t seed_base = 0;
  int tick_limit = 0;
  long max_expansions = lve::sim::AstarConfig{}.max_expansions;
  bool trace = false;
};

void run_simulate(const SimulateArgs& a) {
  if (a.seeds < 1) throw lve::InputError("--seeds must be >= 1");
  const lve::TileGrid grid = lve::load_vglc(a.level);
  const fs::path dir = prepare_dir(a.out_dir);
  Manifest m("simulate");
  m.add("level", a.level);
  m.add("seeds", a.seeds);
  m.add("seed-base", a.seed_base);
  m.add("tick-limit", a.tick_limit);
  m.add("max-expansions", a.max_expansions);
  m.add("trace", a.trace);
  m.add("out-dir", a.out_dir);
  m.write(dir);

  const lve::sim::World world(grid);
  lve::sim::AstarConfig cfg;
  cfg.tick_limit = a.tick_limit;
  cfg.max_expansions = a.max_expansions;
  cfg.record_path = a.trace;
  std::ofstream results = open_out(dir / "results.csv");
  lve::sim::write_results_header(results);
  double p = 0.0, jumps = 0.0, played = 0.0;
  for (int k = 0; k < a.seeds; ++k) {
    const std::uint64_t seed = a.seed_base + static_cast<std::uint64_t>(k);
    const lve::sim::SimResult r = lve::sim::astar_solve(world, seed, cfg);
    lve::sim::write_result_row(results, r);
    if (a.trace) {
      std::ofstream t = open_out(dir / ("trace_seed_" + std::to_string(seed) + ".csv"));
      lve::sim::write_trace(t, r.path);
    }
    p += r.p;
    jumps += r.jumps;
    played += r.completed;
  }
  std::cout << "mean p " << p / a.seeds << "  mean jumps " << jumps / a.seeds << "  playable fraction "
            << played / a.seeds << '\n';
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string level, format = "image", out_dir = "out/render";
};

void run_render(const RenderArgs& a) {
  const lve::TileGrid grid = lve::load_vglc(a.level);
  const fs::path dir = prepare_dir(a.out_dir);
  Manifest m("render");
  m.add("level", a.level);
  m.add("format", a.format);
  m.add("out-dir", a.out_dir);
  m.write(dir);
  write_level(grid, dir / fs::path(a.level).stem(), a.format);
  std::cout << "rendered " << grid.width() << "x" << grid.height() << " level to " << dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent variable evolution of platformer levels with a WGAN generator"};
  app.set_config("--config", "", "key=value config file; [subcommand] sections, flags override it");
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train the WGAN generator on a VGLC level");
  t->add_option("--corpus", train.corpus, "VGLC level text file")->required();
  t->add_option("--out-dir", train.out_dir, "output directory")->capture_default_str();
  t->add_option("--iterations", train.cfg.iterations, "generator iterations")->capture_default_str();
  t->add_option("--batch", train.cfg.batch_size, "batch size")->capture_default_str();
  t->add_option("--lr", train.cfg.lr, "RMSprop learning rate")->capture_default_str();
  t->add_option("--critic-steps", train.cfg.critic_steps, "critic updates per generator update")->capture_default_str();
  t->add_option("--clip", train.cfg.clip, "critic weight clip bound")->capture_default_str();
  t->add_option("--seed", train.cfg.seed, "random seed")->capture_default_str();
  t->add_option("--log-every", train.log_every, "progress line interval (0: quiet)")->capture_default_str();
  t->add_flag("--export-windows", train.export_windows, "also write the encoded windows (windows.lfw)");

  GenerateArgs generate;
  auto* g = app.add_subcommand("generate", "sample levels from a trained generator");
  g->add_option("--model", generate.model, "generator file")->required();
  auto* count = g->add_option("--count", generate.count, "number of random latents")->capture_default_str();
  g->add_option("--latent", generate.latent, "file with one 32-value latent vector")->excludes(count);
  g->add_option("--format", generate.format, "ascii, image or both")->check(CLI::IsMember(kFormats))->capture_default_str();
  g->add_option("--seed", generate.seed, "random seed")->capture_default_str();
  g->add_option("--out-dir", generate.out_dir, "output directory")->capture_default_str();

  MutateArgs mutate;
  auto* mu = app.add_subcommand("mutate", "perturb a latent vector with uniform noise");
  mu->add_option("--model", mutate.model, "generator file")->required();
  mu->add_option("--latent", mutate.latent, "parent latent file")->required();
  mu->add_option("--count", mutate.count, "number of mutants")->capture_default_str();
  mu->add_option("--radius", mutate.radius, "noise range [-r, r] per component")->capture_default_str();
  mu->add_option("--format", mutate.format, "ascii, image or both")->check(CLI::IsMember(kFormats))->capture_default_str();
  mu->add_option("--seed", mutate.seed, "random seed")->capture_default_str();
  mu->add_option("--out-dir", mutate.out_dir, "output directory")->capture_default_str();

  EvolveArgs evolve;
  auto* e = app.add_subcommand("evolve", "search the latent space with CMA-ES");
  e->add_option("--model", evolve.model, "generator file")->required();
  e->add_option("--fitness", evolve.fitness, "ground, segments, jumps-max or jumps-min")
      ->check(CLI::IsMember({"ground", "segments", "jumps-max", "jumps-min"}))
      ->capture_default_str();
  e->add_option("--target", evolve.target, "ground fraction target for --fitness ground")->capture_default_str();
  e->add_option("--plan", evolve.plan, "segment plan, e.g. 1.0,1.0,0.7,0.7e,0.7e")->capture_default_str();
  e->add_option("--lambda", evolve.lambda, "population size")->capture_default_str();
  e->add_option("--sigma", evolve.sigma, "initial step size (default 1.0, or 2.0 for jump objectives)");
  e->add_option("--init", evolve.init, "initial mean: zero or random in [-1,1]^32")
      ->check(CLI::IsMember({"zero", "random"}));
  e->add_option("--max-evals", evolve.max_evals, "evaluation budget")->capture_default_str();
  e->add_option("--repeats", evolve.repeats, "agent runs averaged per evaluation")->capture_default_str();
  e->add_option("--sim-seed-base", evolve.sim_seed_base, "agent seed for the first run")->capture_default_str();
  e->add_option("--tick-limit", evolve.tick_limit, "agent tick limit (0: 100 per column)")->capture_default_str();
  e->add_option("--max-expansions", evolve.max_expansions, "A* node expansion budget")->capture_default_str();
  e->add_option("--workers", evolve.workers, "concurrent fitness evaluations")->capture_default_str();
  e->add_option("--seed", evolve.seed, "random seed")->capture_default_str();
  e->add_option("--format", evolve.format, "ascii, image or both")->check(CLI::IsMember(kFormats))->capture_default_str();
  e->add_option("--out-dir", evolve.out_dir, "output directory")->capture_default_str();

  SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "play a level with the A* agent");
  s->add_option("--level", simulate.level, "VGLC level text file")->required();
  s->add_option("--seeds", simulate.seeds, "number of agent runs")->capture_default_str();
  s->add_option("--seed-base", simulate.seed_base, "seed of the first run")->capture_default_str();
  s->add_option("--tick-limit", simulate.tick_limit, "tick limit (0: 100 per column)")->capture_default_str();
  s->add_option("--max-expansions", simulate.max_expansions, "A* node expansion budget")->capture_default_str();
  s->add_flag("--trace", simulate.trace, "write a per-tick trace for every run");
  s->add_option("--out-dir", simulate.out_dir, "output directory")->capture_default_str();

  RenderArgs render;
  auto* r = app.add_subcommand("render", "render a level as PNG and/or text");
  r->add_option("--level", render.level, "VGLC level text file")->required();
  r->add_option("--format", render.format, "ascii, image or both")->check(CLI::IsMember(kFormats))->capture_default_str();
  r->add_option("--out-dir", render.out_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsage;
  }

  try {
    if (*t) run_train(train);
    if (*g) run_generate(generate);
    if (*mu) run_mutate(mutate);
    if (*e) run_evolve(evolve);
    if (*s) run_simulate(simulate);
    if (*r) run_render(render);
  } catch (const lve::InputError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const lve::IoError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kIo;
  } catch (const lve::NumericError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kNumeric;
  }
  return kOk;
}
