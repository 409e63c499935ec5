// Batch CLI: fit / simulate / stats / report subcommands.
// Exit codes: 0 success, 2 validation error, 3 numerical or runtime failure.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fplearn/fplearn.hpp"

namespace {

// Flat key = value simulation config.  Recognized keys:
//   n, d_x, d_y, d_xy, dt, times (comma-separated hours), seed, output,
//   boundary (reflect|none), init (center|uniform), length_x, length_y,
//   v_<n>_<m> (cosine-mode weight), k_<n> (Bessel-kernel weight), rho0, j_v, j_k
fplearn::SimConfig parse_sim_config(const std::string& path, std::string& output) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);

  fplearn::SimConfig cfg;
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  std::vector<std::tuple<int, int, double>> v_entries;
  std::vector<std::pair<int, double>> k_entries;

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = fplearn::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("missing '=' at line " + std::to_string(line_no));
    const std::string key = fplearn::detail::trim(line.substr(0, eq));
    const std::string val = fplearn::detail::trim(line.substr(eq + 1));

    if (key == "n") cfg.n_particles = std::stoi(val);
    else if (key == "d_x") d(0, 0) = std::stod(val);
    else if (key == "d_y") d(1, 1) = std::stod(val);
    else if (key == "d_xy") d(0, 1) = d(1, 0) = std::stod(val);
    else if (key == "dt") cfg.dt = std::stod(val);
    else if (key == "seed") cfg.seed = std::stoul(val);
    else if (key == "output") output = val;
    else if (key == "length_x") cfg.domain.length_x = std::stod(val);
    else if (key == "length_y") cfg.domain.length_y = std::stod(val);
    else if (key == "rho0") cfg.lib.rho0 = std::stod(val);
    else if (key == "j_v") cfg.lib.j_v = std::stoi(val);
    else if (key == "j_k") cfg.lib.j_k = std::stoi(val);
    else if (key == "boundary") {
      if (val == "reflect") cfg.boundary = fplearn::BoundaryPolicy::Reflect;
      else if (val == "none") cfg.boundary = fplearn::BoundaryPolicy::None;
      else throw std::invalid_argument("unknown boundary '" + val + "'");
    } else if (key == "init") {
      if (val == "center") cfg.init = fplearn::InitialCondition::Center;
      else if (val == "uniform") cfg.init = fplearn::InitialCondition::Uniform;
      else throw std::invalid_argument("unknown init '" + val + "'");
    } else if (key == "times") {
      cfg.snapshot_times.clear();
      std::stringstream ss(val);
      std::string tok;
      while (std::getline(ss, tok, ','))
        cfg.snapshot_times.push_back(std::stod(fplearn::detail::trim(tok)));
    } else if (key.rfind("v_", 0) == 0) {
      const auto us = key.find('_', 2);
      if (us == std::string::npos)
        throw std::invalid_argument("bad potential key '" + key + "'");
      v_entries.emplace_back(std::stoi(key.substr(2, us - 2)),
                             std::stoi(key.substr(us + 1)), std::stod(val));
    } else if (key.rfind("k_", 0) == 0) {
      k_entries.emplace_back(std::stoi(key.substr(2)), std::stod(val));
    } else {
      throw std::invalid_argument("unknown key '" + key + "' at line " +
                                  std::to_string(line_no));
    }
  }

  // sigma = sqrt(2 D) so that D = sigma sigma^T / 2.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(d);
  if (es.eigenvalues().minCoeff() < 0.0)
    throw std::invalid_argument("diffusion matrix must be positive semi-definite");
  cfg.sigma = (2.0 * d).llt().matrixL();

  cfg.v_weights = Eigen::VectorXd::Zero(cfg.lib.j_v * cfg.lib.j_v);
  for (const auto& [n, m, w] : v_entries) {
    if (n < 1 || n > cfg.lib.j_v || m < 1 || m > cfg.lib.j_v)
      throw std::invalid_argument("potential mode out of range");
    cfg.v_weights((n - 1) * cfg.lib.j_v + (m - 1)) = w;
  }
  cfg.k_weights = Eigen::VectorXd::Zero(cfg.lib.j_k);
  for (const auto& [n, w] : k_entries) {
    if (n < 1 || n > cfg.lib.j_k)
      throw std::invalid_argument("kernel index out of range");
    cfg.k_weights(n - 1) = w;
  }
  return cfg;
}

void print_stats(const fplearn::SnapshotSet& data, std::ostream& os) {
  const auto curve =
      fplearn::detail::displacement_curve(data, fplearn::DisplacementAxis::Radial);
  os << "time_hr,count,mean_rho_cm\n";
  os.precision(10);
  for (std::size_t k = 0; k < data.times.size(); ++k)
    os << data.times[k] << ',' << data.frames[k].size() << ',' << curve[k] << '\n';

  const auto cov = fplearn::covariance_rate(data);
  const auto disp = fplearn::fit_displacement(data, fplearn::DisplacementAxis::Radial);
  os << "# covariance_rate: D_x=" << cov.d(0, 0) << " D_xy=" << cov.d(0, 1)
     << " D_y=" << cov.d(1, 1) << " D_eff=" << cov.d_eff << '\n';
  os << "# displacement_fit: D_eff=" << disp.d_eff << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fokker-Planck model learning from particle snapshots"};
  app.require_subcommand(1);

  std::string fit_config, sim_config, stats_input, stats_output, report_dir;

  auto* fit = app.add_subcommand("fit", "Fit PDE models from snapshot CSVs");
  fit->add_option("--config", fit_config, "run configuration file")->required();

  auto* sim = app.add_subcommand("simulate", "Forward-simulate the particle SDE");
  sim->add_option("--config", sim_config, "simulation configuration file")->required();

  auto* stats = app.add_subcommand("stats", "Per-time displacement statistics");
  stats->add_option("--input", stats_input, "snapshot CSV")->required();
  stats->add_option("--output", stats_output, "output CSV (default stdout)");

  auto* report = app.add_subcommand("report", "Regenerate tables from fit outputs");
  report->add_option("--from", report_dir, "directory holding fit.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed()) {
      const auto cfg = fplearn::parse_run_config(fit_config);
      const auto rep = fplearn::run_fit(cfg);
      fplearn::write_fit_outputs(rep);
      int failures = 0;
      for (const auto& g : rep.results) {
        if (g.error.empty()) {
          std::cout << "group " << g.id << ": ok (r2=" << g.model.r2 << ")\n";
        } else {
          std::cerr << "group " << g.id << ": " << g.error << "\n";
          ++failures;
        }
      }
      if (failures == static_cast<int>(rep.results.size()) && failures > 0)
        return 3;
    } else if (sim->parsed()) {
      std::string output = "simulated.csv";
      const auto cfg = parse_sim_config(sim_config, output);
      const auto snapshots = fplearn::simulate(cfg);
      fplearn::save_snapshots(snapshots, output);
      std::cout << "wrote " << output << "\n";
    } else if (stats->parsed()) {
      fplearn::DomainConfig dom;
      const auto data = fplearn::load_snapshots(stats_input, dom);
      if (stats_output.empty()) {
        print_stats(data, std::cout);
      } else {
        std::ofstream os(stats_output);
        if (!os) throw std::runtime_error("cannot write " + stats_output);
        print_stats(data, os);
      }
    } else if (report->parsed()) {
      fplearn::run_report(report_dir);
      std::cout << "report written to " << report_dir << "\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
