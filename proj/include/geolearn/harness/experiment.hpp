#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geolearn/features.hpp"
#include "geolearn/hamiltonian.hpp"
#include "geolearn/harness/config.hpp"
#include "geolearn/harness/data.hpp"
#include "geolearn/harness/io.hpp"
#include "geolearn/harness/learning.hpp"
#include "geolearn/harness/parallel.hpp"
#include "geolearn/harness/seeds.hpp"
#include "geolearn/lasso.hpp"

namespace geolearn::harness {

inline std::uint64_t rff_seed_for(const ExperimentConfig& c) {
  return c.features.rff_seed.value_or(derive_seed(c.seed, Stream::rff));
}

inline std::vector<FeatureTable> build_tables(const ExperimentConfig& c, const InstanceSet& s) {
  std::vector<std::vector<double>> xs;
  for (int l = 0; l < s.size(); ++l) xs.push_back(s.unit(l));
  std::vector<FeatureTable> tables;
  for (const auto& p : feature_grid(c.features)) tables.push_back(build_features(s.family, p, rff_seed_for(c), xs));
  return tables;
}

/// Training labels for every instance: exact, or shadow estimates from T snapshots.
inline Eigen::MatrixXd training_labels(const InstanceSet& s, LabelMode mode, int T) {
  return mode == LabelMode::exact ? s.exact : shadow_labels(s, static_cast<std::size_t>(T));
}

// ---------------------------------------------------------------------------
// Per-observable training
// ---------------------------------------------------------------------------

struct ObservableFit {
  int edge = 0;
  CvResult cv;
  RegressionModel model;
  double train_mse = 0.0;
};

/// CV-selects hyperparameters for one edge observable and refits on all of `train`.
inline ObservableFit train_observable(const ExperimentConfig& c, const std::vector<FeatureTable>& tables,
                                      const std::vector<int>& train, const Eigen::MatrixXd& labels, int edge) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t k = 0; k < train.size(); ++k) y[k] = labels(train[k], edge);
  ObservableFit out;
  out.edge = edge;
  const std::uint64_t solver_seed = derive_seed(c.seed, Stream::solver, static_cast<std::uint64_t>(edge));
  out.cv = cross_validate(tables, c.solver, train, y, c.cv_folds, derive_seed(c.seed, Stream::folds), solver_seed);
  const auto& best = out.cv.best_cell();
  out.model = fit_rows(tables[best.feature_point], train, y, c.solver, solver_value(c.solver, best.solver_point),
                       solver_seed);
  RmseAccumulator acc;
  for (std::size_t k = 0; k < train.size(); ++k) acc.add(predict_row(out.model, tables[best.feature_point], train[k]), y[k]);
  out.train_mse = acc.value() * acc.value();
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct ObservableResult {
  ObservableFit fit;
  double test_rmse = 0.0;
};

struct SweepPoint {
  double value = 0.0;
  std::vector<int> lattice;
  int n = 0;
  int N = 0;
  int T = 0;
  int num_test = 0;
  double rmse = 0.0;
  double rmse_streaming = 0.0;
  double rmse_rescaled = 0.0;
  double train_mse_mean = 0.0;
  std::vector<ObservableResult> observables;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<SweepPoint> points;
};

/// Average label standard deviation used by the optional rescale.
inline constexpr double kReferenceLabelStd = 0.191;

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  if (c.sweep.kind == SweepKind::T && c.label_mode != LabelMode::shadow)
    throw ConfigError("a T sweep needs label_mode = shadow");

  struct PointPlan {
    double value;
    std::vector<int> lattice;
    int N;
    int T;
  };
  std::vector<PointPlan> plan;
  switch (c.sweep.kind) {
    case SweepKind::none: plan.push_back({0.0, c.lattice, c.train_size(), c.T}); break;
    case SweepKind::T:
      for (double t : c.sweep.values) plan.push_back({t, c.lattice, c.train_size(), static_cast<int>(t)});
      break;
    case SweepKind::p:
      for (double p : c.sweep.values) plan.push_back({p, c.lattice, c.train_size_for(p), c.T});
      break;
    case SweepKind::n:
      for (const auto& l : c.sweep.lattices) {
        int n = 1;
        for (int s : l) n *= s;
        plan.push_back({double(n), l, c.train_size(), c.T});
      }
      break;
  }

  // One instance set and feature table set per distinct lattice.
  std::map<std::vector<int>, std::pair<InstanceSet, std::vector<FeatureTable>>> data;
  for (const auto& p : plan) {
    if (data.count(p.lattice)) continue;
    const ParamHamiltonian h = build_family(c, p.lattice);
    InstanceSet s = generate_instances(h, c.M, c.seed,
                                       c.label_mode == LabelMode::shadow ? c.max_shadow_size() : 0, c.workers);
    auto tables = build_tables(c, s);
    data.emplace(p.lattice, std::make_pair(std::move(s), std::move(tables)));
  }

  ExperimentResult res;
  res.config = c;
  res.points.resize(plan.size());
  std::vector<Eigen::MatrixXd> labels(plan.size());
  std::vector<Split> splits(plan.size());
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto& s = data.at(plan[k].lattice).first;
    labels[k] = training_labels(s, c.label_mode, plan[k].T);
    splits[k] = make_split(split_order(c.M, c.seed), plan[k].N);
    auto& pt = res.points[k];
    pt.value = plan[k].value;
    pt.lattice = plan[k].lattice;
    pt.n = s.family.num_qubits();
    pt.N = plan[k].N;
    pt.T = c.label_mode == LabelMode::shadow ? plan[k].T : 0;
    pt.num_test = static_cast<int>(splits[k].test.size());
    pt.observables.resize(s.num_edges());
  }

  std::vector<std::pair<std::size_t, int>> jobs;
  for (std::size_t k = 0; k < plan.size(); ++k)
    for (int e = 0; e < data.at(plan[k].lattice).first.num_edges(); ++e) jobs.emplace_back(k, e);
  parallel_for(jobs.size(), c.workers, [&](std::size_t j) {
    const auto [k, e] = jobs[j];
    const auto& [s, tables] = data.at(plan[k].lattice);
    ObservableResult r;
    r.fit = train_observable(c, tables, splits[k].train, labels[k], e);
    const auto& table = tables[r.fit.cv.best_cell().feature_point];
    RmseAccumulator acc;
    for (int l : splits[k].test) acc.add(predict_row(r.fit.model, table, l), s.exact(l, e));
    r.test_rmse = acc.value();
    res.points[k].observables[e] = std::move(r);
  });

  // RMSE over all test instances x edges, computed streaming and batch.
  for (std::size_t k = 0; k < plan.size(); ++k) {
    auto& pt = res.points[k];
    const auto& [s, tables] = data.at(plan[k].lattice);
    RmseAccumulator acc;
    std::vector<double> pred, truth;
    for (const auto& o : pt.observables) {
      const auto& table = tables[o.fit.cv.best_cell().feature_point];
      for (int l : splits[k].test) {
        const double p = predict_row(o.fit.model, table, l);
        acc.add(p, s.exact(l, o.fit.edge));
        pred.push_back(p);
        truth.push_back(s.exact(l, o.fit.edge));
      }
      pt.train_mse_mean += o.fit.train_mse / double(pt.observables.size());
    }
    pt.rmse_streaming = acc.value();
    const Eigen::Map<Eigen::VectorXd> pv(pred.data(), pred.size()), tv(truth.data(), truth.size());
    pt.rmse = rmse_batch(pv, tv);
    if (std::abs(pt.rmse - pt.rmse_streaming) > 1e-12 * std::max(1.0, pt.rmse))
      throw NumericError("streaming and batch RMSE disagree");
    const double mean = tv.mean();
    const double sd = std::sqrt((tv.array() - mean).square().sum() / double(tv.size()));
    pt.rmse_rescaled = sd > 0.0 ? pt.rmse * kReferenceLabelStd / sd : pt.rmse;
  }
  return res;
}

inline std::string solver_name(const SolverSpec& s) { return s.kind == "penalized" ? "alpha" : "B"; }

/// metrics.csv (one row per sweep point), metrics_by_observable.csv, cv_table.csv
/// and manifest.json.
inline void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r) {
  const auto& c = r.config;
  std::vector<std::string> cols{"sweep", "value", "lattice", "n", "N", "T", "label_mode",
                                "num_test", "num_observables", "rmse", "train_mse_mean"};
  if (c.normalize_std) cols.push_back("rmse_rescaled");
  CsvWriter metrics("metrics", cols);
  CsvWriter by_obs("metrics_by_observable",
                   {"sweep", "value", "edge", "i", "j", "feature_point", "R", "gamma", "delta2", solver_name(c.solver),
                    "cv_rmse", "test_rmse", "train_mse", "nonzeros", "converged"});
  CsvWriter cv("cv_table", {"sweep", "value", "edge", "feature_point", "solver_point", "fold", "rmse"});
  const auto grid = feature_grid(c.features);
  for (const auto& pt : r.points) {
    std::vector<std::string> row{to_string(c.sweep.kind), num(pt.value), lattice_name(pt.lattice),
                                 std::to_string(pt.n), std::to_string(pt.N), std::to_string(pt.T),
                                 to_string(c.label_mode), std::to_string(pt.num_test),
                                 std::to_string(pt.observables.size()), num(pt.rmse), num(pt.train_mse_mean)};
    if (c.normalize_std) row.push_back(num(pt.rmse_rescaled));
    metrics.row(row);
    const auto edges = Lattice(pt.lattice).edges();
    for (const auto& o : pt.observables) {
      const auto& best = o.fit.cv.best_cell();
      const auto& fp = grid[best.feature_point];
      by_obs.row({to_string(c.sweep.kind), num(pt.value), std::to_string(o.fit.edge),
                  std::to_string(edges[o.fit.edge].first), std::to_string(edges[o.fit.edge].second),
                  std::to_string(best.feature_point), std::to_string(fp.num_frequencies), num(fp.gamma),
                  num(fp.delta2), num(solver_value(c.solver, best.solver_point)), num(best.mean),
                  num(o.test_rmse), num(o.fit.train_mse), std::to_string(o.fit.model.weights.size()),
                  o.fit.model.trace.converged ? "1" : "0"});
      for (const auto& cell : o.fit.cv.cells)
        for (std::size_t f = 0; f < cell.fold_rmse.size(); ++f)
          cv.row({to_string(c.sweep.kind), num(pt.value), std::to_string(o.fit.edge),
                  std::to_string(cell.feature_point), std::to_string(cell.solver_point), std::to_string(f),
                  num(cell.fold_rmse[f])});
    }
  }
  write_file(dir / "metrics.csv", metrics.str());
  write_file(dir / "metrics_by_observable.csv", by_obs.str());
  write_file(dir / "cv_table.csv", cv.str());
  Json m;
  m["format"] = "geolearn-manifest";
  m["version"] = 1;
  m["command"] = "sweep";
  m["config"] = to_json(c);
  m["files"] = {"metrics.csv", "metrics_by_observable.csv", "cv_table.csv"};
  write_json(dir / "manifest.json", m);
}

// ---------------------------------------------------------------------------
// Coupling importance
// ---------------------------------------------------------------------------

/// importance[c] = sum of |w_k| over features k that depend on coordinate c.
inline std::vector<double> coupling_importance(const RegressionModel& m, const FeatureTable& t, int num_params) {
  if (m.fingerprint != t.fingerprint) throw ArgumentError("model was trained on a different feature map");
  std::vector<double> imp(num_params, 0.0);
  for (const auto& [k, w] : m.weights)
    for (int c : t.coords_of(k)) imp.at(c) += std::abs(w);
  return imp;
}

struct ImportanceTarget {
  int edge = 0;
  std::vector<double> importance;  ///< per edge (Heisenberg: coordinate = edge)
  std::vector<int> distance;       ///< obs distance from the target edge
  double near_mean = 0.0;
  double far_mean = 0.0;
  bool has_far = false;
  bool near_exceeds = false;
};

/// Trains one model per edge (CV over the configured grids, training split of
/// the config) and reports importance of edges within delta1 of the target
/// against edges farther away.
inline std::vector<ImportanceTarget> importance_study(const ExperimentConfig& c) {
  c.validate();
  const ParamHamiltonian h = build_family(c, c.lattice);
  InstanceSet s = generate_instances(h, c.M, c.seed, c.label_mode == LabelMode::shadow ? c.T : 0, c.workers);
  const auto tables = build_tables(c, s);
  const Eigen::MatrixXd labels = training_labels(s, c.label_mode, c.T);
  const Split split = make_split(split_order(c.M, c.seed), c.train_size());
  std::vector<ImportanceTarget> out(s.num_edges());
  parallel_for(out.size(), c.workers, [&](std::size_t e) {
    const auto fit = train_observable(c, tables, split.train, labels, static_cast<int>(e));
    auto& t = out[e];
    t.edge = static_cast<int>(e);
    t.importance = coupling_importance(fit.model, tables[fit.cv.best_cell().feature_point], h.num_params);
    double ns = 0, fs = 0;
    int nc = 0, fc = 0;
    for (int f = 0; f < s.num_edges(); ++f) {
      const std::vector<Site> a{s.edges[e].first, s.edges[e].second}, b{s.edges[f].first, s.edges[f].second};
      const int d = obs_distance(h.lattice, a, b);
      t.distance.push_back(d);
      const int owner = h.terms[f].params.front();
      if (d <= c.features.delta1) {
        ns += t.importance[owner];
        ++nc;
      } else {
        fs += t.importance[owner];
        ++fc;
      }
    }
    t.near_mean = ns / nc;
    t.has_far = fc > 0;
    t.far_mean = fc ? fs / fc : 0.0;
    t.near_exceeds = t.has_far && t.near_mean > t.far_mean;
  });
  return out;
}

inline void write_importance(const std::filesystem::path& dir, const ExperimentConfig& c,
                             const std::vector<ImportanceTarget>& targets) {
  const auto edges = Lattice(c.lattice).edges();
  CsvWriter w("importance", {"target_edge", "target_i", "target_j", "edge", "i", "j", "distance", "near", "importance"});
  CsvWriter s("importance_summary", {"target_edge", "target_i", "target_j", "near_mean", "far_mean", "near_exceeds"});
  for (const auto& t : targets) {
    for (std::size_t e = 0; e < edges.size(); ++e)
      w.row({std::to_string(t.edge), std::to_string(edges[t.edge].first), std::to_string(edges[t.edge].second),
             std::to_string(e), std::to_string(edges[e].first), std::to_string(edges[e].second),
             std::to_string(t.distance[e]), t.distance[e] <= c.features.delta1 ? "1" : "0", num(t.importance[e])});
    s.row({std::to_string(t.edge), std::to_string(edges[t.edge].first), std::to_string(edges[t.edge].second),
           num(t.near_mean), num(t.far_mean), t.has_far ? (t.near_exceeds ? "1" : "0") : "na"});
  }
  write_file(dir / "importance.csv", w.str());
  write_file(dir / "importance_summary.csv", s.str());
}

// ---------------------------------------------------------------------------
// Locality probe
// ---------------------------------------------------------------------------

struct LocalityTrial {
  int instance = 0;
  PauliString pauli;
  std::vector<double> couplings;
  double gap = 0.0;
  std::vector<double> delta1;
  std::vector<int> ip_size;
  std::vector<double> err;

  /// err(delta1) nonincreasing up to `slack`.
  bool monotone(double slack = 1e-10) const {
    for (std::size_t k = 1; k < err.size(); ++k)
      if (err[k] > err[k - 1] + slack) return false;
    return true;
  }
};

/// err(delta1) = |Tr(P rho(x)) - Tr(P rho(chi_P(x)))| with chi_P zeroing the
/// unit-cube coordinates outside I_P (couplings there become 1).
inline LocalityTrial locality_probe(const ParamHamiltonian& h, const PauliString& p,
                                    std::span<const double> couplings, const std::vector<double>& delta1_grid,
                                    const GroundStateOptions& gopt = {}) {
  if (h.num_qubits() > 14) throw CapacityError("locality probe is capped at 14 qubits");
  LocalityTrial t;
  t.pauli = p;
  t.couplings.assign(couplings.begin(), couplings.end());
  PauliSum op;
  op.add(p, 1.0);
  const auto full = ground_state(h, couplings, gopt);
  t.gap = full.gap;
  const double ref = expectation(full, op);
  const auto x = couplings_to_unit(couplings);
  std::map<std::vector<int>, double> cache;
  for (double d1 : delta1_grid) {
    const auto ip = compute_IP(h, p, d1);
    auto it = cache.find(ip.coords);
    if (it == cache.end()) {
      double v = ref;
      if (static_cast<int>(ip.coords.size()) != h.num_params) {
        const auto j = unit_to_couplings(restrict_chi(x, ip.coords));
        v = expectation(ground_state(h, j, gopt), op);
      }
      it = cache.emplace(ip.coords, v).first;
    }
    t.delta1.push_back(d1);
    t.ip_size.push_back(static_cast<int>(ip.coords.size()));
    t.err.push_back(std::abs(ref - it->second));
  }
  return t;
}

/// Random two-site equal-letter words (XX, YY, ZZ) at distance 1 or 2 on
/// random instances whose gap exceeds `min_gap`; delta1 runs over 0..diameter-1.
inline std::vector<LocalityTrial> locality_study(const ParamHamiltonian& h, int instances, int paulis_per_instance,
                                                 std::uint64_t seed, double min_gap = 1e-3, int workers = 1) {
  std::vector<std::pair<Site, Site>> pairs;
  for (Site a = 0; a < h.num_qubits(); ++a)
    for (Site b = a + 1; b < h.num_qubits(); ++b) {
      const int d = qubit_distance(h.lattice, a, b);
      if (d >= 1 && d <= 2) pairs.emplace_back(a, b);
    }
  if (pairs.empty()) throw ArgumentError("lattice has no qubit pairs at distance 1-2");
  std::vector<double> grid;
  for (int d = 0; d < h.lattice.diameter(); ++d) grid.push_back(d);

  std::vector<LocalityTrial> out(static_cast<std::size_t>(instances) * paulis_per_instance);
  parallel_for(instances, workers, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, Stream::probe, i));
    std::vector<double> j;
    for (std::uint64_t attempt = 0;; ++attempt) {
      j = sample_instance(h, mix_seed(derive_seed(seed, Stream::instances, i), attempt));
      if (ground_state(h, j).gap > min_gap) break;
      if (attempt > 100) throw NumericError("could not sample a gapped instance");
    }
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    std::uniform_int_distribution<int> letter(1, 3);
    for (int k = 0; k < paulis_per_instance; ++k) {
      const auto [a, b] = pairs[pick(rng)];
      const auto l = static_cast<Pauli>(letter(rng));
      auto t = locality_probe(h, PauliString({{a, l}, {b, l}}), j, grid);
      t.instance = static_cast<int>(i);
      out[i * paulis_per_instance + k] = std::move(t);
    }
  });
  return out;
}

inline void write_locality(const std::filesystem::path& dir, const std::vector<LocalityTrial>& trials) {
  CsvWriter w("locality", {"trial", "instance", "pauli", "gap", "delta1", "ip_size", "err"});
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const auto& t = trials[k];
    for (std::size_t d = 0; d < t.err.size(); ++d)
      w.row({std::to_string(k), std::to_string(t.instance), t.pauli.str(), num(t.gap), num(t.delta1[d]),
             std::to_string(t.ip_size[d]), num(t.err[d])});
  }
  write_file(dir / "locality.csv", w.str());
}

// ---------------------------------------------------------------------------
// Training error of the explicit indicator-map weights
// ---------------------------------------------------------------------------

struct ExplicitWeightsReport {
  int N = 0;
  std::uint64_t m_phi = 0;
  std::size_t cells_evaluated = 0;
  double eps1_measured = 0.0;
  double eps2 = 0.0;
  double train_error = 0.0;
  double bound = 0.0;
  double w_l1 = 0.0;
  double w_l1_bound = 0.0;
  /// Training error of the constrained fit with B = ||w'||_1.
  double constrained_train_error = 0.0;
  double constrained_gap = 0.0;
  bool pass = false;
};

/// Builds w'_{x',P} = alpha_P Tr(P rho(chi_P(x'))) on the cells activated by N
/// random training instances, and measures its training error against labels
/// Tr(O rho(x)) + u with |u| <= eps2.
inline ExplicitWeightsReport explicit_weights_check(const ParamHamiltonian& h, const PauliSum& O,
                                                    const IndicatorOptions& opt, int N, double eps2,
                                                    std::uint64_t seed, double eps3 = 1e-6) {
  if (N < 1) throw ArgumentError("need at least one training instance");
  std::vector<PauliString> strings;
  for (const auto& [p, a] : O)
    if (!p.is_identity()) strings.push_back(p);
  const IndicatorFeatureMap fm(h, opt, strings);

  ExplicitWeightsReport r;
  r.N = N;
  r.m_phi = fm.m_phi();
  r.eps2 = eps2;
  std::vector<SparseFeature> rows;
  Eigen::VectorXd exact(N), y(N);
  std::mt19937_64 noise(derive_seed(seed, Stream::noise));
  std::uniform_real_distribution<double> u(-eps2, eps2);
  for (int l = 0; l < N; ++l) {
    const auto j = sample_instance(h, derive_seed(seed, Stream::instances, l));
    exact[l] = expectation(ground_state(h, j), O);
    y[l] = exact[l] + (eps2 > 0.0 ? u(noise) : 0.0);
    rows.push_back(fm(couplings_to_unit(j)));
  }

  std::map<std::uint64_t, double> w;
  std::map<std::vector<double>, GroundStateResult> states;
  for (const auto& row : rows)
    for (std::uint64_t k : row.ones) {
      if (w.count(k)) continue;
      const auto& e = fm.entry_of(k);
      const auto point = e.grid.point(k - e.offset, h.num_params);
      auto it = states.find(point);
      if (it == states.end()) it = states.emplace(point, ground_state(h, unit_to_couplings(point))).first;
      const PauliString& p = strings[&e - fm.entries().data()];
      PauliSum single;
      single.add(p, 1.0);
      w[k] = O.coefficient(p) * expectation(it->second, single);
    }
  r.cells_evaluated = states.size();

  RegressionModel m;
  m.feature_dim = fm.m_phi();
  m.intercept = O.coefficient(PauliString{});
  for (const auto& [k, v] : w)
    if (v != 0.0) m.weights.emplace_back(k, v);
  r.w_l1 = m.l1_norm();
  r.w_l1_bound = w_prime_norm_bound(fm, [&] {
    double s = 0;
    for (const auto& [p, a] : O)
      if (!p.is_identity()) s += std::abs(a);
    return s;
  }());

  auto data = make_indicator_dataset(rows, y);
  data.eps2 = eps2;
  r.train_error = training_error(m, data);
  for (int l = 0; l < N; ++l) r.eps1_measured = std::max(r.eps1_measured, std::abs(predict(m, rows[l]) - exact[l]));
  r.bound = std::pow(r.eps1_measured + eps2, 2) + 1e-8;

  // The constrained fit works on y minus the known identity part.
  auto centred = data;
  centred.y.array() -= m.intercept;
  const auto fit = fit_constrained(centred, r.w_l1, eps3);
  r.constrained_train_error = training_error(fit, centred);
  r.constrained_gap = fit.trace.optimality;
  r.pass = r.train_error <= r.bound && r.w_l1 <= r.w_l1_bound + 1e-12 &&
           r.constrained_train_error <= r.train_error + eps3;
  return r;
}

}  // namespace geolearn::harness
