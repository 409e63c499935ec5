#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fplearn/data_model.hpp"
#include "fplearn/empirical_stats.hpp"
#include "fplearn/kde.hpp"
#include "fplearn/library.hpp"
#include "fplearn/nondim.hpp"
#include "fplearn/regression.hpp"
#include "fplearn/test_functions.hpp"
#include "fplearn/weakform.hpp"

namespace fplearn {

enum class GroupBy { Combined, Plot, Replicate };
enum class ModelFamily { Full, Anisotropic, Effective };
enum class Solver { Mstls, Ols };

/// Batch-run configuration, read from a flat key = value text file.
struct RunConfig {
  std::vector<std::string> inputs;
  GroupBy group_by = GroupBy::Combined;
  ModelFamily family = ModelFamily::Full;
  Solver solver = Solver::Mstls;
  DomainConfig domain;
  TestFunctionSpec test_functions;
  LibrarySpec library;
  std::string output_dir = "out";
  unsigned long seed = 0;
  int bootstrap_b = 1000;
  double t_c = 48.0;

  /// Library flags implied by the model family.
  LibrarySpec family_library(bool single_replicate) const {
    LibrarySpec lib = library;
    switch (family) {
      case ModelFamily::Full:
        lib.include_v = true;
        lib.include_d = true;
        lib.deff_only = false;
        // Interaction terms only make sense within one experimental run.
        if (!single_replicate) lib.include_k = false;
        break;
      case ModelFamily::Anisotropic:
        lib.include_v = false;
        lib.include_k = false;
        lib.include_d = true;
        lib.deff_only = false;
        break;
      case ModelFamily::Effective:
        lib.deff_only = true;
        break;
    }
    return lib;
  }

  void validate() const {
    if (inputs.empty()) throw std::invalid_argument("RunConfig: no inputs");
    domain.validate();
    if (bootstrap_b < 1) throw std::invalid_argument("RunConfig: bootstrap_b >= 1");
    if (t_c <= 0.0) throw std::invalid_argument("RunConfig: t_c > 0 required");
  }
};

/// Parse the flat configuration format.  Lines are `key = value`; `#` starts a
/// comment; `input` may repeat.  Unknown keys are an error.
inline RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("parse_run_config: cannot open " + path);

  RunConfig cfg;
  std::string line;
  long line_no = 0;
  // Distinct type so diagnostics raised here pass untouched through the
  // value-parsing catch below.
  struct ParseError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
  };
  auto bad = [&](const std::string& why) {
    throw ParseError("parse_run_config: " + why + " at line " +
                     std::to_string(line_no) + " of " + path);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad("missing '='");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (val.empty()) bad("empty value for " + key);

    auto as_int = [&] { return std::stoi(val); };
    auto as_double = [&] { return std::stod(val); };
    auto as_bool = [&] {
      if (val == "true" || val == "1") return true;
      if (val == "false" || val == "0") return false;
      bad("boolean expected for " + key);
      return false;
    };
    try {
      if (key == "input") cfg.inputs.push_back(val);
      else if (key == "group_by") {
        if (val == "combined") cfg.group_by = GroupBy::Combined;
        else if (val == "plot") cfg.group_by = GroupBy::Plot;
        else if (val == "replicate") cfg.group_by = GroupBy::Replicate;
        else bad("unknown group_by");
      } else if (key == "family") {
        if (val == "full") cfg.family = ModelFamily::Full;
        else if (val == "anisotropic") cfg.family = ModelFamily::Anisotropic;
        else if (val == "effective") cfg.family = ModelFamily::Effective;
        else bad("unknown family");
      } else if (key == "solver") {
        if (val == "mstls") cfg.solver = Solver::Mstls;
        else if (val == "ols") cfg.solver = Solver::Ols;
        else bad("unknown solver");
      } else if (key == "output_dir") cfg.output_dir = val;
      else if (key == "seed") cfg.seed = std::stoul(val);
      else if (key == "bootstrap_b") cfg.bootstrap_b = as_int();
      else if (key == "t_c") cfg.t_c = as_double();
      else if (key == "length_x") cfg.domain.length_x = as_double();
      else if (key == "length_y") cfg.domain.length_y = as_double();
      else if (key == "grid_nx") cfg.domain.grid_nx = as_int();
      else if (key == "grid_ny") cfg.domain.grid_ny = as_int();
      else if (key == "grid_nt") cfg.domain.grid_nt = as_int();
      else if (key == "m_x") cfg.test_functions.m[0] = as_int();
      else if (key == "m_y") cfg.test_functions.m[1] = as_int();
      else if (key == "m_t") cfg.test_functions.m[2] = as_int();
      else if (key == "tau0") cfg.test_functions.tau0 = as_double();
      else if (key == "j_v") cfg.library.j_v = as_int();
      else if (key == "j_k") cfg.library.j_k = as_int();
      else if (key == "rho0") cfg.library.rho0 = as_double();
      else if (key == "kernel_radius_cells") cfg.library.kernel_radius_cells = as_int();
      else if (key == "include_k") cfg.library.include_k = as_bool();
      else bad("unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      bad("unparsable value for " + key);
    }
  }
  cfg.validate();
  return cfg;
}

/// One grouping's fitted models and diagnostics.  `error` is nonempty when a
/// pipeline stage failed for this group; other fields are then unset.
struct GroupResult {
  std::string id;
  std::string error;

  std::vector<TermDescriptor> terms;
  SparseModel model;          // selected family, requested solver
  Eigen::VectorXd ols_weights;  // companion unregularized fit
  double effective_aic = std::numeric_limits<double>::quiet_NaN();

  ScaleSet scales;
  PiGroups groups;
  Eigen::Matrix2d d_fit = Eigen::Matrix2d::Zero();

  DiffusionEstimate cov_rate;
  DiffusionEstimate displacement;
  BootstrapResult d_eff_boot;

  // Displacement-curve table for reporting: time, mean radial displacement,
  // bootstrap CI bounds.
  std::vector<double> times, mean_rho, rho_lo, rho_hi;
};

struct RunReport {
  RunConfig config;
  std::vector<GroupResult> results;
};

namespace detail {

inline std::string replicate_key(const PositionRecord& r) {
  return r.plot_id + ":" + r.replicate_id;
}

inline Eigen::Matrix2d diffusion_from_model(const Eigen::VectorXd& w,
                                            const std::vector<TermDescriptor>& terms) {
  Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
  for (std::size_t j = 0; j < terms.size(); ++j) {
    switch (terms[j].kind) {
      case TermKind::DiffXX: d(0, 0) += w(j); break;
      case TermKind::DiffYY: d(1, 1) += w(j); break;
      case TermKind::DiffXY:
        d(0, 1) += w(j);
        d(1, 0) += w(j);
        break;
      default: break;
    }
  }
  // The effective model carries its single coefficient isotropically.
  bool has_yy = false;
  for (const auto& t : terms)
    if (t.kind == TermKind::DiffYY) has_yy = true;
  if (!has_yy) d(1, 1) = d(0, 0);
  return d;
}

inline long total_particle_count(const SnapshotSet& set) {
  long n = 0;
  for (const auto& f : set.frames) n += static_cast<long>(f.size());
  return n;
}

}  // namespace detail

/// Fit one already-grouped snapshot set with a given library.  Shared by
/// run_fit and the effective-model AIC baseline.
inline void fit_group(const SnapshotSet& data, const RunConfig& cfg,
                      const LibrarySpec& lib, GroupResult& out) {
  const DensityField density = density_from_snapshots(data);
  const WeakSystem sys = assemble(density, lib, cfg.test_functions);
  out.terms = sys.descriptors;

  const long n_total = detail::total_particle_count(data);
  if (cfg.solver == Solver::Mstls) {
    out.model = mstls_sweep(sys.G, sys.b);
  } else {
    out.model.weights = ols(sys.G, sys.b);
    for (long j = 0; j < out.model.weights.size(); ++j)
      out.model.support.push_back(static_cast<int>(j));
    out.model.r2 = r_squared(sys.G, sys.b, out.model.weights);
  }
  const Eigen::VectorXd residual = sys.b - sys.G * out.model.weights;
  out.model.aic = aic(out.model.weights, residual, n_total);
  if (!out.model.zero_model)
    out.model.std_errors = robust_standard_errors(sys.G, residual, out.model.support);
  else
    out.model.std_errors = Eigen::VectorXd::Zero(sys.G.cols());
  out.ols_weights = ols(sys.G, sys.b);

  out.d_fit = detail::diffusion_from_model(out.model.weights, out.terms);
  out.scales = characteristic_scales(out.model.weights, out.terms, density, lib, cfg.t_c);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(out.d_fit);
  if (es.eigenvalues().minCoeff() > 0.0) {
    out.scales.a = diffusion_centric_map(out.d_fit, cfg.t_c);
    out.groups = pi_groups(out.scales, out.d_fit);
  }
}

/// End-to-end batch fit.  Groups run independently: an error in one group is
/// captured in its result and does not disturb the others.
inline RunReport run_fit(const RunConfig& cfg) {
  cfg.validate();

  std::vector<SnapshotSet> loaded;
  for (const auto& path : cfg.inputs)
    loaded.push_back(load_snapshots(path, cfg.domain));
  const SnapshotSet all = combine(loaded);

  std::vector<std::pair<std::string, SnapshotSet>> groups;
  switch (cfg.group_by) {
    case GroupBy::Combined:
      groups.emplace_back("combined", all);
      break;
    case GroupBy::Plot:
      groups = split_by(all, [](const PositionRecord& r) { return r.plot_id; });
      break;
    case GroupBy::Replicate:
      groups = split_by(all, detail::replicate_key);
      break;
  }

  RunReport report;
  report.config = cfg;
  for (auto& [id, data] : groups) {
    GroupResult res;
    res.id = id;
    std::string stage = "validate";
    try {
      data.validate();

      std::set<std::string> reps;
      for (const auto& f : data.frames)
        for (const auto& r : f) reps.insert(detail::replicate_key(r));
      const LibrarySpec lib = cfg.family_library(reps.size() == 1);

      stage = "fit";
      fit_group(data, cfg, lib, res);

      // Effective-diffusion baseline for the family comparison.
      stage = "aic_baseline";
      if (cfg.family == ModelFamily::Effective) {
        res.effective_aic = res.model.aic;
      } else {
        GroupResult baseline;
        LibrarySpec eff_lib = lib;
        eff_lib.deff_only = true;
        fit_group(data, cfg, eff_lib, baseline);
        res.effective_aic = baseline.model.aic;
      }
      res.model.delta_aic = delta_aic(res.model.aic, res.effective_aic);

      stage = "empirical_stats";
      res.cov_rate = covariance_rate(data);
      res.displacement = fit_displacement(data, DisplacementAxis::Radial);
      res.d_eff_boot = bootstrap_se(
          [](const SnapshotSet& s) {
            return fit_displacement(s, DisplacementAxis::Radial).d_eff;
          },
          data, cfg.bootstrap_b, cfg.seed);

      stage = "displacement_table";
      const auto curve = detail::displacement_curve(data, DisplacementAxis::Radial);
      res.times = data.times;
      res.mean_rho = curve;
      for (std::size_t k = 0; k < data.times.size(); ++k) {
        SnapshotSet single = data;  // bootstrap the per-time mean only
        const auto boot = bootstrap_se(
            [k](const SnapshotSet& s) {
              return detail::displacement_curve(s, DisplacementAxis::Radial)[k];
            },
            single, cfg.bootstrap_b, cfg.seed + 1 + k);
        res.rho_lo.push_back(boot.ci_lo);
        res.rho_hi.push_back(boot.ci_hi);
      }
    } catch (const std::exception& e) {
      res.error = stage + ": " + e.what();
    }
    report.results.push_back(std::move(res));
  }
  return report;
}

namespace detail {

inline nlohmann::ordered_json matrix_json(const Eigen::Matrix2d& m) {
  return {{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}};
}

}  // namespace detail

/// Serialize a fit report to `<output_dir>/fit.json`.  Weights are reported in
/// raw cm-hr units alongside the dimensionless groups.
inline void write_fit_outputs(const RunReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(report.config.output_dir);

  nlohmann::ordered_json doc;
  doc["groups"] = nlohmann::ordered_json::array();
  for (const auto& res : report.results) {
    nlohmann::ordered_json g;
    g["id"] = res.id;
    if (!res.error.empty()) {
      g["error"] = res.error;
      doc["groups"].push_back(g);
      continue;
    }
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < res.terms.size(); ++j) {
      if (res.model.weights(j) == 0.0) continue;
      terms.push_back({{"name", res.terms[j].name()},
                       {"weight", res.model.weights(j)},
                       {"two_sigma", 2.0 * res.model.std_errors(j)},
                       {"ols_weight", res.ols_weights(j)}});
    }
    g["terms"] = terms;
    g["zero_model"] = res.model.zero_model;
    g["lambda_star"] = res.model.lambda_star;
    g["r2"] = res.model.r2;
    g["aic"] = res.model.aic;
    g["delta_aic_vs_effective"] = res.model.delta_aic;
    g["d_fit"] = detail::matrix_json(res.d_fit);
    g["scales"] = {{"t_c", res.scales.t_c}, {"u_c", res.scales.u_c},
                   {"v_c", res.scales.v_c}, {"k_c", res.scales.k_c}};
    g["pi_v"] = detail::matrix_json(res.groups.pi_v);
    g["pi_v_norm"] = res.groups.pi_v.operatorNorm();
    g["pi_k"] = detail::matrix_json(res.groups.pi_k);
    g["pi_d"] = detail::matrix_json(res.groups.pi_d);
    if (res.groups.isotropic) {
      g["pi_v_scalar"] = res.groups.pi_v_scalar;
      g["pi_k_scalar"] = res.groups.pi_k_scalar;
    }
    g["empirical"] = {
        {"covariance_rate_d", detail::matrix_json(res.cov_rate.d)},
        {"covariance_rate_d_eff", res.cov_rate.d_eff},
        {"displacement_d_eff", res.displacement.d_eff},
        {"displacement_d_eff_2sigma", 2.0 * res.d_eff_boot.std_error}};
    nlohmann::ordered_json disp = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < res.times.size(); ++k)
      disp.push_back({{"time_hr", res.times[k]},
                      {"mean_rho_cm", res.mean_rho[k]},
                      {"ci_lo", res.rho_lo[k]},
                      {"ci_hi", res.rho_hi[k]}});
    g["displacement_curve"] = disp;
    doc["groups"].push_back(g);
  }

  std::ofstream out(fs::path(report.config.output_dir) / "fit.json");
  if (!out) throw std::runtime_error("write_fit_outputs: cannot write fit.json");
  out << doc.dump(2) << "\n";
}

/// Regenerate human-readable tables and plot-data CSVs from a fit.json
/// produced by write_fit_outputs.  Deterministic: identical inputs give
/// byte-identical outputs.
inline void run_report(const std::string& fit_dir) {
  namespace fs = std::filesystem;
  const fs::path src = fs::path(fit_dir) / "fit.json";
  std::ifstream in(src);
  if (!in) throw std::runtime_error("run_report: missing " + src.string());
  nlohmann::ordered_json doc;
  in >> doc;

  std::ofstream table(fs::path(fit_dir) / "models.csv");
  if (!table) throw std::runtime_error("run_report: cannot write models.csv");
  table << "group,term,weight,two_sigma,r2,aic,delta_aic\n";
  table.precision(10);
  for (const auto& g : doc["groups"]) {
    const std::string id = g["id"];
    if (g.contains("error")) {
      table << id << ",ERROR," << std::string(g["error"]) << ",,,,\n";
      continue;
    }
    for (const auto& t : g["terms"])
      table << id << ',' << std::string(t["name"]) << ','
            << double(t["weight"]) << ',' << double(t["two_sigma"]) << ','
            << double(g["r2"]) << ',' << double(g["aic"]) << ','
            << double(g["delta_aic_vs_effective"]) << '\n';
  }

  for (const auto& g : doc["groups"]) {
    if (g.contains("error")) continue;
    const std::string id = g["id"];
    std::string safe = id;
    for (auto& c : safe)
      if (c == '/' || c == ':' || c == ' ') c = '_';
    std::ofstream csv(fs::path(fit_dir) / ("displacement_" + safe + ".csv"));
    if (!csv) throw std::runtime_error("run_report: cannot write displacement csv");
    csv.precision(10);
    // Model curves sqrt(pi (D +/- 2 sigma) t) from the empirical fit.
    const double d_eff = g["empirical"]["displacement_d_eff"];
    const double two_sigma = g["empirical"]["displacement_d_eff_2sigma"];
    csv << "time_hr,mean_rho_cm,ci_lo,ci_hi,model_rho,model_rho_lo,model_rho_hi\n";
    for (const auto& row : g["displacement_curve"]) {
      const double t = row["time_hr"];
      auto curve = [&](double d) {
        return (d > 0.0) ? std::sqrt(M_PI * d * t) : 0.0;
      };
      csv << t << ',' << double(row["mean_rho_cm"]) << ','
          << double(row["ci_lo"]) << ',' << double(row["ci_hi"]) << ','
          << curve(d_eff) << ',' << curve(d_eff - two_sigma) << ','
          << curve(d_eff + two_sigma) << '\n';
    }
  }
}

}  // namespace fplearn
