// Command-line front end: simulation runs, the epsilon sweep, assumption
// certification, and mobility eigenvalue scans. Exit codes: 0 success,
// 1 acceptance or assumption failure, 2 configuration error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "hydrolim/hydrolim.hpp"

namespace fs = std::filesystem;
using namespace hydrolim;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_root = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
  bool force = false;
};

RunConfig load(const CommonArgs& args) {
  if (args.config_path.empty()) throw ConfigInvalid("--config is required");
  RunConfig cfg = load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

fs::path prepare_run_dir(const RunConfig& cfg, const std::string& out_root) {
  const fs::path dir = fs::path(out_root) / run_id(cfg);
  fs::create_directories(dir);
  std::ofstream cp(dir / "config.txt", std::ios::binary);
  cp << canonical_dump(cfg);
  return dir;
}

int cmd_simulate_kinetic(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const auto ctx = detail_harness::make_context(cfg);
  const double eps = cfg.epsilons.front();
  const fs::path dir = prepare_run_dir(cfg, args.out_root);

  if (cfg.solver == "grid") {
    SmoluchowskiScheme smol(ctx.x, ctx.potential, ctx.mobility);
    const auto limit = run_smoluchowski(smol, ctx.rho0, cfg.T, cfg.dt_smol,
                                        ctx.snapshot_times);
    const auto rows = diagnose_run(cfg, ctx, eps, limit);
    write_diagnostics_csv((dir / "diagnostics.csv").string(), rows);
    std::cout << "wrote " << (dir / "diagnostics.csv").string() << "\n";
    return 0;
  }

  // Ensemble solver: empirical moments on 32 spatial bins at time T.
  EnsembleState st;
  if (cfg.init_kind == "gaussian") {
    st = init_ensemble_gaussian(cfg.ensemble_M, 1, cfg.sigma0sq, cfg.seed);
  } else {
    st = init_ensemble_from_density(cfg.ensemble_M, ctx.x, ctx.rho0, cfg.seed);
  }
  const double dt = cfg.ensemble_c * eps;
  const long n_steps = std::lround(std::ceil(cfg.T / dt));
  const FrictionModel fr = isotropic_friction(1, cfg.gamma);
  for (long s = 0; s < n_steps; ++s)
    sde_step(st, ctx.potential, fr, eps, cfg.T / n_steps, args.threads);

  const Axis bins(cfg.Lx, 32);
  const EnsembleMoments m = moments_ensemble(st, bins);
  std::ofstream out(dir / "ensemble_moments.csv", std::ios::binary);
  out << "bin_center,count,rho,rho_se,J,J_se,P\n";
  for (int b = 0; b < bins.cells; ++b)
    out << fmt_g17(bins.center(b)) << ',' << m.count[b] << ','
        << fmt_g17(m.rho[b]) << ',' << fmt_g17(m.rho_se[b]) << ','
        << fmt_g17(m.J[b]) << ',' << fmt_g17(m.J_se[b]) << ','
        << fmt_g17(m.P[b]) << "\n";
  const EntropyEstimate ent = entropy_estimate_ensemble(st);
  std::cout << "wrote " << (dir / "ensemble_moments.csv").string() << "\n"
            << "relative entropy vs local Gibbs (histogram estimate): "
            << fmt_g17(ent.value) << "\n";
  return 0;
}

int cmd_simulate_smoluchowski(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const auto ctx = detail_harness::make_context(cfg);
  const fs::path dir = prepare_run_dir(cfg, args.out_root);
  SmoluchowskiScheme scheme(ctx.x, ctx.potential, ctx.mobility);
  const auto snaps = run_smoluchowski(scheme, ctx.rho0, cfg.T, cfg.dt_smol,
                                      ctx.snapshot_times);
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    char name[40];
    std::snprintf(name, sizeof name, "snapshot_%02zu.csv", k);
    write_density_csv((dir / name).string(), ctx.x, snaps[k].rho,
                      scheme.gibbs_weights());
  }
  std::cout << "wrote " << snaps.size() << " snapshots under " << dir.string()
            << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const SweepReport rep =
      run_sweep(cfg, args.out_root, args.threads, args.force);
  bool pass = rep.h_monotone;
  for (const auto& q : rep.quantities) {
    const SlopeFit& f = rep.slopes.at(q);
    std::printf("%-20s slope %8.4f  residual %7.4f  %s\n", q.c_str(), f.slope,
                f.residual, f.pass ? "pass" : "FAIL");
    pass = pass && f.pass;
  }
  std::printf("outputs under %s\n", rep.out_dir.c_str());
  return pass ? 0 : 1;
}

int cmd_check_assumptions(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const AssumptionReport rep = certify(cfg);
  std::cout << format_report(rep);
  return rep.all_ok() ? 0 : 1;
}

int cmd_mobility_info(const std::string& kind, double radius, double viscosity,
                      double dmin, double dmax, int points,
                      const std::string& out_path) {
  if (!(radius > 0.0) || !(viscosity > 0.0))
    throw ConfigInvalid("radius and viscosity must be positive");
  if (!(dmin > 0.0) || !(dmax > dmin) || points < 2)
    throw ConfigInvalid("need 0 < dmin < dmax and points >= 2");
  std::vector<double> distances(points);
  for (int i = 0; i < points; ++i)
    distances[i] =
        dmin * std::pow(dmax / dmin, static_cast<double>(i) / (points - 1));
  if (out_path.empty()) {
    write_mobility_info_csv(std::cout, kind, radius, viscosity, distances);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error("cannot write " + out_path);
    write_mobility_info_csv(out, kind, radius, viscosity, distances);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scaled kinetic solver, drift-diffusion limit, and "
               "hydrodynamic mobility toolbox"};
  app.require_subcommand(1);

  CommonArgs args;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", args.config_path,
                              "path to a run configuration file");
    if (needs_config) c->required();
    sub->add_option("--seed", args.seed, "override the config seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--out", args.out_root, "output root directory");
    sub->add_option("--threads", args.threads, "worker thread count")
        ->check(CLI::Range(1, 64));
    sub->add_flag("--force", args.force,
                  "run even if assumption certification fails");
  };

  auto* sk = app.add_subcommand("simulate-kinetic",
                                "run the kinetic solver at the first epsilon");
  add_common(sk, true);
  auto* ss = app.add_subcommand("simulate-smoluchowski",
                                "run the limiting drift-diffusion solver");
  add_common(ss, true);
  auto* sw = app.add_subcommand("sweep",
                                "epsilon sweep with convergence slope fits");
  add_common(sw, true);
  auto* ca = app.add_subcommand("check-assumptions",
                                "certify the hypotheses for a configuration");
  add_common(ca, true);

  auto* mi = app.add_subcommand("mobility-info",
                                "two-sphere eigenvalue scan as CSV");
  std::string kind = "rpy", mi_out;
  double radius = 1.0, viscosity = 1.0, dmin = 1e-3, dmax = 1.0;
  int points = 17;
  mi->add_option("--kind", kind, "rpy or oseen");
  mi->add_option("--radius", radius, "sphere radius");
  mi->add_option("--viscosity", viscosity, "fluid viscosity");
  mi->add_option("--dmin", dmin, "smallest center distance");
  mi->add_option("--dmax", dmax, "largest center distance");
  mi->add_option("--points", points, "number of scan points");
  mi->add_option("--out", mi_out, "write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
    if (sk->parsed()) return cmd_simulate_kinetic(args);
    if (ss->parsed()) return cmd_simulate_smoluchowski(args);
    if (sw->parsed()) return cmd_sweep(args);
    if (ca->parsed()) return cmd_check_assumptions(args);
    if (mi->parsed())
      return cmd_mobility_info(kind, radius, viscosity, dmin, dmax, points,
                               mi_out);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
