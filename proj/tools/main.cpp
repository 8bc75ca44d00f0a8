#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mpr/bench.hpp"
#include "mpr/config.hpp"
#include "mpr/errors.hpp"
#include "mpr/dataset.hpp"
#include "mpr/models.hpp"
#include "mpr/planner.hpp"
#include "mpr/svg.hpp"

namespace fs = std::filesystem;
using namespace mpr;

namespace {

int effective_jobs(const Config& cfg) {
  if (cfg.jobs > 0) return cfg.jobs;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

int cmd_gen_dataset(const Config& cfg, bool dry_run, bool paper_scale, const std::string& name,
                    bool also_csv) {
  GridSpec grid = cfg.grid;
  if (paper_scale) grid.reset_strides();
  std::cout << "grid cardinality (before feasibility filtering): "
            << count_queries(grid, cfg.vehicle) << "\n";
  if (dry_run) return 0;

  fs::create_directories(cfg.out);
  const auto t0 = std::chrono::steady_clock::now();
  size_t last_done = 0;
  Dataset ds = build_dataset(grid, cfg.vehicle, cfg.ocp, effective_jobs(cfg),
                             [&](const GenProgress& p) {
                               if (p.done - last_done >= 5000 || p.done == p.total) {
                                 last_done = p.done;
                                 std::cout << "  " << p.done << "/" << p.total << " solved, "
                                           << p.accepted << " accepted\n";
                               }
                             });
  ds.seed = cfg.seed;
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out_path = cfg.out / name;
  save(ds, out_path);
  if (also_csv) export_csv(ds, fs::path(out_path).replace_extension(".csv"));
  std::cout << "accepted " << ds.accepted << ", rejected " << ds.rejected << " ("
            << std::setprecision(3) << wall << " s)\n"
            << "wrote " << out_path.string() << "\n";
  return 0;
}

int cmd_train(const Config& cfg, const std::string& model_name, const fs::path& dataset_path,
              const std::string& out_name) {
  const ModelKind kind = model_kind_from_string(model_name);
  const Dataset full = load(dataset_path);
  auto [train_set, test_set] = split(full, cfg.train_fraction, cfg.seed);
  std::cout << "training " << model_name << " on " << train_set.size() << " samples (test "
            << test_set.size() << ", latent " << cfg.model.latent << ", epochs "
            << cfg.train.epochs << ")\n";

  net::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  TrainResult result;
  try {
    result = train_model(kind, train_set, test_set, tc, cfg.model);
  } catch (const TrainingError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  }

  fs::create_directories(cfg.out);
  const fs::path ckpt = cfg.out / (out_name.empty() ? model_name + ".mpnet" : out_name);
  save_model(result.model, ckpt);
  const uint64_t hash = file_checksum(ckpt);

  const fs::path curve_csv = cfg.out / (model_name + "_loss.csv");
  {
    std::ofstream f(curve_csv);
    f << "# checkpoint_crc32=" << std::hex << hash << std::dec << "\n";
    f << "epoch,train_loss,test_loss\n";
    f.precision(12);
    for (size_t e = 0; e < result.train_loss.size(); ++e)
      f << e << ',' << result.train_loss[e] << ',' << result.test_loss[e] << '\n';
  }
  std::vector<double> epochs(result.train_loss.size());
  for (size_t i = 0; i < epochs.size(); ++i) epochs[i] = static_cast<double>(i);
  svg::write_line_plot(cfg.out / (model_name + "_loss.svg"), model_name + " loss",
                       {"train", "test"}, {epochs, epochs},
                       {result.train_loss, result.test_loss}, true);

  std::cout << "final train loss " << result.train_loss.back() << ", final test loss "
            << result.test_loss.back() << ", best epoch " << result.best_epoch << " (test "
            << result.test_loss[result.best_epoch] << ")\n"
            << "wrote " << ckpt.string() << "\n";
  return 0;
}

int cmd_bench(const Config& cfg, const fs::path& dataset_path,
              const std::vector<std::string>& checkpoints, bool skip_timing, bool do_assert,
              int timing_reps) {
  const Dataset full = load(dataset_path);
  auto [train_set, test_set] = split(full, cfg.train_fraction, cfg.seed);
  std::cout << "benchmarking on " << test_set.size() << " test samples\n";

  EvalReport report;
  report.dataset_hash = full.config_hash;
  report.host = std::to_string(std::thread::hardware_concurrency()) + "-thread host";
  report.note = "learned models are scored on every test query; the analytic baseline only on "
                "its kinematically valid subset";

  Eigen::MatrixXd pool(5, static_cast<Eigen::Index>(test_set.size()));
  for (size_t i = 0; i < test_set.size(); ++i)
    pool.col(static_cast<Eigen::Index>(i)) = test_set.samples[i].query.vec();
  const std::vector<size_t> batches{50, 3500, 13000};

  std::vector<std::pair<std::string, AnyModel>> models;
  for (const auto& c : checkpoints) {
    AnyModel m = load_model(c);
    models.emplace_back(to_string(m.kind), std::move(m));
  }

  double mp_rbfn_pos = -1, analytic_pos = -1;
  double mp_per_traj_50 = -1, mp_per_traj_13000 = -1, ocp_per_traj_50 = -1;
  const ModelReport* mp_report = nullptr;
  const ModelReport* basic_report = nullptr;
  double mp_loss = -1, basic_loss = -1;

  // Loss weights for the cross-model MSE comparison, fixed from the train split.
  Eigen::MatrixXd y_train(5 * full.grid_spec.time_grid.n_points,
                          static_cast<Eigen::Index>(train_set.size()));
  for (size_t i = 0; i < train_set.size(); ++i)
    y_train.col(static_cast<Eigen::Index>(i)) = flatten(train_set.samples[i].trajectory);

  for (auto& [name, model] : models) {
    PredictionSet set = predict_with_model(model, test_set);
    ModelReport mr = report_for(name, set);
    if (!skip_timing) {
      auto gen = [&model](const Eigen::MatrixXd& q) { (void)model.forward(q); };
      for (size_t b : batches) mr.timing.push_back(time_inference(gen, pool, b, timing_reps));
    }
    report.models.push_back(std::move(mr));
    if (model.kind == ModelKind::mp_rbfn) {
      mp_rbfn_pos = report.models.back().rmse_position;
      mp_report = &report.models.back();
      if (!skip_timing) {
        mp_per_traj_50 = report.models.back().timing[0].per_traj_s;
        mp_per_traj_13000 = report.models.back().timing[2].per_traj_s;
      }
    }
    if (model.kind == ModelKind::basic_rbfn) basic_report = &report.models.back();
  }

  {
    PredictionSet set = predict_analytic(cfg.vehicle, test_set);
    ModelReport mr = report_for("analytic-mp", set, /*can_reject=*/true);
    if (!skip_timing) {
      auto gen = [&](const Eigen::MatrixXd& q) {
        for (Eigen::Index i = 0; i < q.cols(); ++i)
          (void)analytic_mp(Query::from_vec(q.col(i)), cfg.vehicle, full.grid_spec.time_grid);
      };
      for (size_t b : batches) mr.timing.push_back(time_inference(gen, pool, b, timing_reps));
    }
    analytic_pos = mr.rmse_position;
    report.models.push_back(std::move(mr));
  }

  if (!skip_timing) {
    // The OCP row is timed at batch 50 only; full batches would take hours.
    ModelReport mr;
    mr.name = "ocp-solver";
    auto gen = [&](const Eigen::MatrixXd& q) {
      for (Eigen::Index i = 0; i < q.cols(); ++i)
        (void)solve(Query::from_vec(q.col(i)), cfg.vehicle, full.grid_spec.time_grid, cfg.ocp);
    };
    mr.timing.push_back(time_inference(gen, pool, 50, std::max(1, timing_reps / 10)));
    ocp_per_traj_50 = mr.timing[0].per_traj_s;
    report.models.push_back(std::move(mr));
  }

  // Weighted test MSE for the RBFN convergence comparison.
  if (mp_report && basic_report) {
    net::GroupWeights weights;
    {
      // Same 1/range^2 recipe the trainer uses.
      const int M = full.grid_spec.time_grid.n_points;
      auto range_of = [&](int r0, int rows) {
        const auto b = y_train.middleRows(r0, rows);
        return std::max(b.maxCoeff() - b.minCoeff(), 1e-3);
      };
      weights.position = 1.0 / std::pow(range_of(0, 2 * M), 2);
      weights.velocity = 1.0 / std::pow(range_of(2 * M, M), 2);
      weights.steering = 1.0 / std::pow(range_of(3 * M, M), 2);
      weights.orientation = 1.0 / std::pow(range_of(4 * M, M), 2);
    }
    const int M = full.grid_spec.time_grid.n_points;
    auto loss_of = [&](const AnyModel& m) {
      Eigen::MatrixXd q(5, static_cast<Eigen::Index>(test_set.size()));
      Eigen::MatrixXd y(5 * M, static_cast<Eigen::Index>(test_set.size()));
      for (size_t i = 0; i < test_set.size(); ++i) {
        q.col(static_cast<Eigen::Index>(i)) = test_set.samples[i].query.vec();
        y.col(static_cast<Eigen::Index>(i)) = flatten(test_set.samples[i].trajectory);
      }
      return net::weighted_mse(m.forward(q), y, M, weights);
    };
    for (auto& [name, model] : models) {
      if (model.kind == ModelKind::mp_rbfn) mp_loss = loss_of(model);
      if (model.kind == ModelKind::basic_rbfn) basic_loss = loss_of(model);
    }
    std::cout << "weighted test MSE: mp-rbfn " << mp_loss << ", basic-rbfn " << basic_loss << "\n";
  }

  emit_report(report, cfg.out);
  std::cout << "report written under " << cfg.out.string() << "\n";

  if (!do_assert) return 0;
  int failures = 0;
  auto check = [&failures](bool ok, const std::string& what) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << what << "\n";
    if (!ok) ++failures;
  };
  if (mp_rbfn_pos >= 0 && analytic_pos >= 0)
    check(mp_rbfn_pos <= 0.5 * analytic_pos,
          "mp-rbfn position RMSE at most half the analytic baseline");
  if (mp_loss >= 0 && basic_loss >= 0)
    check(mp_loss < basic_loss, "mp-rbfn weighted test MSE below basic-rbfn");
  for (const auto& m : report.models) {
    if (m.name != "analytic-mp") continue;
    check(m.bins.valid_share[0] > m.bins.valid_share[1] &&
              m.bins.valid_share[1] > m.bins.valid_share[2],
          "analytic valid share strictly decreases across yaw bins");
    check(m.bins.mean_position_error[2] >= 2.0 * m.bins.mean_position_error[0],
          "analytic 1.6 rad bin error at least twice the 0 rad bin");
  }
  if (mp_report)
    check(mp_report->bins.mean_position_error[2] <=
              1.5 * mp_report->bins.mean_position_error[0],
          "mp-rbfn degradation across yaw bins at most 50%");
  if (mp_per_traj_50 > 0 && ocp_per_traj_50 > 0)
    check(ocp_per_traj_50 >= 100.0 * mp_per_traj_50,
          "ocp per-trajectory time at least 100x mp-rbfn at batch 50");
  if (mp_per_traj_50 > 0 && mp_per_traj_13000 > 0)
    check(mp_per_traj_13000 <= mp_per_traj_50,
          "mp-rbfn amortized time at batch 13000 at most batch 50");
  return failures == 0 ? 0 : 4;
}

int cmd_plan(const Config& cfg, const fs::path& scenario_path, const std::string& checkpoint,
             const std::string& generator_name, int n_steps) {
  const Scenario scenario = load_scenario(scenario_path);
  TrajectoryGenerator gen;
  TimeGrid grid = cfg.grid.time_grid;
  if (!checkpoint.empty()) {
    const AnyModel model = load_model(checkpoint);
    grid = model.time_grid();
    gen = generator_from_model(model);
  } else if (generator_name == "interp") {
    gen = interp_generator(grid);
  } else if (generator_name == "analytic") {
    gen = analytic_generator(cfg.vehicle, grid);
  } else if (generator_name == "ocp") {
    gen = ocp_generator(cfg.vehicle, grid, cfg.ocp);
  } else {
    std::cerr << "need --checkpoint or --generator interp|analytic|ocp\n";
    return 2;
  }

  const PlanLog log =
      run_receding_horizon(scenario, gen, cfg.planner_weights, cfg.vehicle, grid, n_steps,
                           grid.step_s);
  fs::create_directories(cfg.out);
  write_plan_csv(log, cfg.out / "plan.csv");
  write_plan_svg(log, scenario, cfg.out / "plan.svg");

  size_t emergencies = 0;
  for (const auto& s : log.steps) emergencies += s.emergency ? 1 : 0;
  std::cout << "steps: " << log.steps.size() << ", min clearance: " << log.min_clearance()
            << " m, emergencies: " << emergencies << "\n";
  if (!scenario.obstacles.empty()) {
    const auto& last = log.steps.back();
    const bool ahead = last.ego.x_m > last.obstacles.front().x_m;
    std::cout << (ahead ? "overtake complete" : "behind obstacle") << "\n";
  }
  std::cout << "wrote " << (cfg.out / "plan.csv").string() << " and plan.svg\n";
  if (emergencies == log.steps.size()) {
    std::cerr << "every step fell back to the emergency trajectory; the generator produced no "
                 "acceptable candidate\n";
    return 5;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion-primitive toolkit: OCP dataset generation, RBFN training, benchmarks and "
               "a sampling planner"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  int jobs = -1;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_set = true; });
  app.add_option("--jobs", jobs, "worker threads (0 = all cores)");
  app.add_option("--out", out_dir, "output directory");

  auto* gen = app.add_subcommand("gen-dataset", "solve the boundary-condition grid");
  bool dry_run = false, paper_scale = false, also_csv = false;
  std::string ds_name = "dataset.mpds";
  gen->add_flag("--dry-run", dry_run, "print the grid cardinality and exit");
  gen->add_flag("--paper-scale", paper_scale, "full-resolution grid (no desk-scale strides)");
  gen->add_flag("--csv", also_csv, "also export a CSV copy");
  gen->add_option("--output", ds_name, "output file name");

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  std::string model_name = "mp-rbfn", dataset_path, ckpt_name;
  int epochs = -1, latent = -1;
  std::string kernel_name;
  train->add_option("--model", model_name,
                    "mp-rbfn | mp-rbfn-no-interp | basic-rbfn | mlp-tanh | mlp-sig");
  train->add_option("--dataset", dataset_path, "input .mpds")->required();
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--latent", latent, "latent size / hidden width");
  train->add_option("--kernel", kernel_name, "gaussian | inv_quadratic | inv_multiquadratic");
  train->add_option("--output", ckpt_name, "checkpoint file name");

  auto* bench = app.add_subcommand("bench", "accuracy, yaw-bin and timing report");
  std::string bench_dataset;
  std::vector<std::string> checkpoints;
  bool skip_timing = false, do_assert = false;
  int timing_reps = 30;
  bench->add_option("--dataset", bench_dataset, "input .mpds")->required();
  bench->add_option("--checkpoint", checkpoints, "model checkpoints (repeatable)");
  bench->add_flag("--skip-timing", skip_timing, "omit the timing table");
  bench->add_flag("--assert", do_assert, "exit non-zero when a threshold check fails");
  bench->add_option("--timing-reps", timing_reps, "timing repetitions per batch size");

  auto* plan = app.add_subcommand("plan", "closed-loop sampling planner");
  std::string scenario_path, plan_checkpoint, generator_name;
  int n_steps = 60;
  plan->add_option("--scenario", scenario_path, "scenario JSON")->required();
  plan->add_option("--checkpoint", plan_checkpoint, "trajectory model checkpoint");
  plan->add_option("--generator", generator_name, "interp | analytic | ocp (instead of a model)");
  plan->add_option("--steps", n_steps, "planning steps");

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg = config_path.empty() ? Config{} : load_config(config_path);
    if (seed_set) cfg.seed = seed;
    if (jobs >= 0) cfg.jobs = jobs;
    if (!out_dir.empty()) cfg.out = out_dir;
    if (epochs > 0) cfg.train.epochs = epochs;
    if (latent > 0) cfg.model.latent = latent;
    if (!kernel_name.empty()) cfg.model.kernel = net::kernel_from_string(kernel_name);
    cfg.train.seed = cfg.seed;

    if (gen->parsed()) return cmd_gen_dataset(cfg, dry_run, paper_scale, ds_name, also_csv);
    if (train->parsed()) return cmd_train(cfg, model_name, dataset_path, ckpt_name);
    if (bench->parsed())
      return cmd_bench(cfg, bench_dataset, checkpoints, skip_timing, do_assert, timing_reps);
    if (plan->parsed())
      return cmd_plan(cfg, scenario_path, plan_checkpoint, generator_name, n_steps);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
