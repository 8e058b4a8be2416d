// geolearn command-line driver.
//
//   geolearn [--config c.json] [--seed S] [--out DIR] [--workers K] <command> [options]
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 capacity error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "geolearn/geolearn.hpp"

namespace fs = std::filesystem;
using namespace geolearn;
using namespace geolearn::harness;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<int> workers;
  bool timings = false;
};

ExperimentConfig load(const Globals& g) {
  ExperimentConfig c;
  if (!g.config.empty()) c = load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.workers) c.workers = *g.workers;
  c.validate();
  return c;
}

Json manifest(const std::string& command, const ExperimentConfig& c, std::vector<std::string> files) {
  Json m;
  m["format"] = "geolearn-manifest";
  m["version"] = 1;
  m["command"] = command;
  m["config"] = to_json(c);
  m["files"] = files;
  return m;
}

std::pair<InstanceSet, Split> load_or_generate(const ExperimentConfig& c, const std::string& data_dir) {
  const ParamHamiltonian h = build_family(c, c.lattice);
  if (!data_dir.empty()) {
    auto loaded = read_instances(data_dir, h);
    if (c.label_mode == LabelMode::shadow) {
      if (loaded.first.shadows.empty()) throw ConfigError("shadow labels requested but the data has no shadows");
      if (loaded.first.shadows.front().size() < static_cast<std::size_t>(c.T))
        throw ConfigError("stored shadows are shorter than T");
    }
    return loaded;
  }
  InstanceSet s =
      generate_instances(h, c.M, c.seed, c.label_mode == LabelMode::shadow ? c.max_shadow_size() : 0, c.workers);
  Split split = make_split(split_order(c.M, c.seed), c.train_size());
  return {std::move(s), std::move(split)};
}

int cmd_gen_data(const Globals& g) {
  const auto c = load(g);
  auto [s, split] = load_or_generate(c, "");
  write_instances(g.out, s, split);
  std::vector<std::string> files{"instances.csv", "labels.csv", "split.csv"};
  if (!s.shadows.empty()) files.push_back("shadows/");
  write_json(fs::path(g.out) / "manifest.json", manifest("gen-data", c, files));
  std::cout << fmt::format("wrote {} instances, {} edges each, to {}\n", s.size(), s.num_edges(), g.out);
  return 0;
}

int cmd_train(const Globals& g, const std::string& data_dir) {
  const auto c = load(g);
  auto [s, split] = load_or_generate(c, data_dir);
  const auto tables = build_tables(c, s);
  const Eigen::MatrixXd labels = training_labels(s, c.label_mode, c.T);
  std::vector<ObservableFit> fits(s.num_edges());
  parallel_for(fits.size(), c.workers,
               [&](std::size_t e) { fits[e] = train_observable(c, tables, split.train, labels, static_cast<int>(e)); });

  const auto grid = feature_grid(c.features);
  CsvWriter sel("selection", {"edge", "i", "j", "feature_point", "R", "gamma", "delta2", solver_name(c.solver),
                              "cv_rmse", "train_mse", "model"});
  CsvWriter cv("cv_table", {"edge", "feature_point", "solver_point", "fold", "rmse"});
  for (const auto& f : fits) {
    const auto& best = f.cv.best_cell();
    const std::string file = fmt::format("models/edge_{:03d}.json", f.edge);
    write_json(fs::path(g.out) / file, model_to_json(f.model, tables[best.feature_point].spec));
    sel.row({std::to_string(f.edge), std::to_string(s.edges[f.edge].first), std::to_string(s.edges[f.edge].second),
             std::to_string(best.feature_point), std::to_string(grid[best.feature_point].num_frequencies),
             num(grid[best.feature_point].gamma), num(grid[best.feature_point].delta2),
             num(solver_value(c.solver, best.solver_point)), num(best.mean), num(f.train_mse), file});
    for (const auto& cell : f.cv.cells)
      for (std::size_t k = 0; k < cell.fold_rmse.size(); ++k)
        cv.row({std::to_string(f.edge), std::to_string(cell.feature_point), std::to_string(cell.solver_point),
                std::to_string(k), num(cell.fold_rmse[k])});
  }
  write_file(fs::path(g.out) / "selection.csv", sel.str());
  write_file(fs::path(g.out) / "cv_table.csv", cv.str());
  write_json(fs::path(g.out) / "manifest.json", manifest("train", c, {"selection.csv", "cv_table.csv", "models/"}));
  std::cout << fmt::format("trained {} models into {}\n", fits.size(), g.out);
  return 0;
}

int cmd_eval(const Globals& g, const std::string& data_dir, const std::string& models_dir) {
  const auto c = load(g);
  auto [s, split] = load_or_generate(c, data_dir);
  const auto tables = build_tables(c, s);
  const CsvTable sel = read_csv(fs::path(models_dir) / "selection.csv", "selection");
  CsvWriter pred("predictions", {"instance", "edge", "i", "j", "predicted", "exact"});
  CsvWriter met("eval_metrics", {"edge", "i", "j", "num_test", "rmse"});
  RmseAccumulator total;
  for (const auto& row : sel.rows) {
    const int e = std::stoi(row[sel.column("edge")]);
    const auto fp = static_cast<std::size_t>(std::stoul(row[sel.column("feature_point")]));
    if (e < 0 || e >= s.num_edges() || fp >= tables.size()) throw ConfigError("selection.csv does not match the config");
    const auto model = model_from_json(Json::parse(read_file(fs::path(models_dir) / row[sel.column("model")])));
    RmseAccumulator acc;
    for (int l : split.test) {
      const double p = predict_row(model, tables[fp], l);
      acc.add(p, s.exact(l, e));
      total.add(p, s.exact(l, e));
      pred.row({std::to_string(l), std::to_string(e), std::to_string(s.edges[e].first),
                std::to_string(s.edges[e].second), num(p), num(s.exact(l, e))});
    }
    met.row({std::to_string(e), std::to_string(s.edges[e].first), std::to_string(s.edges[e].second),
             std::to_string(acc.count()), num(acc.value())});
  }
  met.row({"all", "", "", std::to_string(total.count()), num(total.value())});
  write_file(fs::path(g.out) / "predictions.csv", pred.str());
  write_file(fs::path(g.out) / "eval_metrics.csv", met.str());
  write_json(fs::path(g.out) / "manifest.json", manifest("eval", c, {"predictions.csv", "eval_metrics.csv"}));
  std::cout << fmt::format("test RMSE {:.6g} over {} predictions\n", total.value(), total.count());
  return 0;
}

int cmd_sweep(const Globals& g) {
  const auto c = load(g);
  const auto r = run_experiment(c);
  write_experiment(g.out, r);
  for (const auto& p : r.points)
    std::cout << fmt::format("{} {:g}: N={} T={}  rmse={:.6g}\n", to_string(c.sweep.kind), p.value, p.N, p.T, p.rmse);
  return 0;
}

int cmd_verify_norm(const Globals& g, int trials, int terms, int range) {
  const auto c = load(g);
  const Lattice lat(c.lattice);
  const GeoRange r = GeoRange::uniform(lat, range);
  Json reports = Json::array();
  int passed = 0;
  for (int t = 0; t < trials; ++t) {
    const PauliSum o = random_local_observable(lat, r, terms, derive_seed(c.seed, Stream::observables, t));
    const auto rep = verify_inequality(o, lat, r);
    Json j;
    j["trial"] = t;
    j["num_strings"] = o.size();
    j["sum_abs_alpha"] = rep.sum_abs_alpha;
    j["trace_analytic"] = rep.trace_analytic;
    if (rep.trace_dense) j["trace_dense"] = *rep.trace_dense;
    j["spectral_norm"] = rep.spectral_norm;
    j["bound_constant"] = rep.bound_constant;
    j["best_shift"] = rep.best_shift;
    j["pass"] = rep.pass;
    reports.push_back(j);
    passed += rep.pass;
  }
  Json doc;
  doc["format"] = "geolearn-norm-report";
  doc["version"] = 1;
  doc["lattice"] = c.lattice;
  doc["range"] = range;
  doc["trials"] = reports;
  write_json(fs::path(g.out) / "norm_reports.json", doc);
  std::cout << fmt::format("{}/{} trials satisfy the Pauli-norm bound\n", passed, trials);
  return passed == trials ? 0 : 1;
}

int cmd_importance(const Globals& g) {
  const auto c = load(g);
  const auto targets = importance_study(c);
  write_importance(g.out, c, targets);
  write_json(fs::path(g.out) / "manifest.json",
             manifest("importance", c, {"importance.csv", "importance_summary.csv"}));
  int wins = 0, counted = 0;
  for (const auto& t : targets)
    if (t.has_far) {
      ++counted;
      wins += t.near_exceeds;
    }
  std::cout << fmt::format("near edges dominate for {}/{} targets\n", wins, counted);
  return 0;
}

int cmd_probe_locality(const Globals& g, int instances, int paulis, double min_gap) {
  const auto c = load(g);
  const ParamHamiltonian h = build_family(c, c.lattice);
  const auto trials = locality_study(h, instances, paulis, c.seed, min_gap, c.workers);
  write_locality(g.out, trials);
  Json m = manifest("probe-locality", c, {"locality.csv"});
  m["instances"] = instances;
  m["paulis_per_instance"] = paulis;
  m["min_gap"] = min_gap;
  write_json(fs::path(g.out) / "manifest.json", m);
  int mono = 0;
  for (const auto& t : trials) mono += t.monotone();
  std::cout << fmt::format("{}/{} trials have nonincreasing err(delta1)\n", mono, trials.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning ground-state properties of geometrically local Hamiltonians"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--timings", g.timings, "Print wall time to stderr");

  auto* gen = app.add_subcommand("gen-data", "Sample instances, exact labels and shadows");
  std::string data_dir, models_dir;
  auto* train = app.add_subcommand("train", "Cross-validate and fit one model per edge correlation");
  train->add_option("--data", data_dir, "Directory written by gen-data (default: regenerate)");
  auto* eval = app.add_subcommand("eval", "Evaluate trained models on the test split");
  eval->add_option("--data", data_dir, "Directory written by gen-data (default: regenerate)");
  eval->add_option("--models", models_dir, "Directory written by train")->required();
  auto* sweep = app.add_subcommand("sweep", "Run the configured T, N or lattice-size sweep");
  int trials = 20, terms = 12, range = 2;
  auto* norm = app.add_subcommand("verify-norm", "Check the Pauli 1-norm bound on random local observables");
  norm->add_option("--trials", trials, "Number of random observables")->check(CLI::PositiveNumber);
  norm->add_option("--terms", terms, "Strings drawn per observable")->check(CLI::PositiveNumber);
  norm->add_option("--range", range, "Block width R_k on every axis")->check(CLI::PositiveNumber);
  auto* imp = app.add_subcommand("importance", "Per-edge coupling importance of trained models");
  int instances = 10, paulis = 5;
  double min_gap = 1e-3;
  auto* probe = app.add_subcommand("probe-locality", "err(delta1) decay of restricted ground states");
  probe->add_option("--instances", instances, "Random instances")->check(CLI::PositiveNumber);
  probe->add_option("--paulis", paulis, "Pauli words per instance")->check(CLI::PositiveNumber);
  probe->add_option("--min-gap", min_gap, "Reject instances with a smaller spectral gap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  int rc = 1;
  try {
    fs::create_directories(g.out);
    if (*gen) rc = cmd_gen_data(g);
    else if (*train) rc = cmd_train(g, data_dir);
    else if (*eval) rc = cmd_eval(g, data_dir, models_dir);
    else if (*sweep) rc = cmd_sweep(g);
    else if (*norm) rc = cmd_verify_norm(g, trials, terms, range);
    else if (*imp) rc = cmd_importance(g);
    else if (*probe) rc = cmd_probe_locality(g, instances, paulis, min_gap);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (g.timings)
    std::cerr << fmt::format("wall time {:.3f} s\n",
                             std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return rc;
}
