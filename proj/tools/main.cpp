// Command-line front end: validate model files, run experiments, and emit
// regret-bound curves.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <vector>

#include <CLI11.hpp>

#include "safectl/bench.hpp"

namespace {

using namespace safectl;

int report(const Error& e) {
  std::cerr << "error: " << e.what() << "\n";
  return exit_code_for(e.kind());
}

int cmd_validate(const std::string& path) {
  const LoadedModel loaded = load_model(path);
  const LtiSystem& sys = loaded.plant;
  std::printf("model %s: %ld states, %ld inputs, %ld disturbances, %ld outputs\n",
              loaded.model.name.c_str(), long(sys.states()), long(sys.inputs()),
              long(sys.disturbances()), long(sys.outputs()));
  std::printf("%s, spectral radius of A = %.6g, stabilizable\n",
              loaded.model.continuous ? "discretized by zero-order hold" : "discrete time",
              spectral_radius(sys.A()));
  std::printf("gamma %.6g  mu %.6g  sigma %.6g  w_max %.6g  delta %.6g\n", loaded.model.gamma,
              loaded.model.mu, loaded.model.sigma, loaded.model.w_max, loaded.model.delta);
  return 0;
}

int cmd_run(ExperimentConfig cfg, int replicas) {
  if (replicas < 1) throw Error(ErrorKind::InvalidConfig, "--replicas must be >= 1");
  if (replicas == 1) {
    const RunResult r = run_experiment(cfg);
    std::printf("T = %ld  regret = %.6g  t* = %ld  violations = %ld  -> %s\n", cfg.horizon,
                r.final_regret ? r.final_regret->direct : 0.0, r.constants.t_star, r.violations,
                cfg.out_dir.c_str());
    return 0;
  }
  // Independent seeds, one subdirectory each, no shared state.
  std::vector<std::future<int>> jobs;
  for (int i = 0; i < replicas; ++i) {
    ExperimentConfig one = cfg;
    one.seed = cfg.seed + std::uint64_t(i);
    one.out_dir = (std::filesystem::path(cfg.out_dir) / ("replica_" + std::to_string(i))).string();
    jobs.push_back(std::async(std::launch::async, [one] {
      try {
        const RunResult r = run_experiment(one);
        std::printf("seed %llu  regret = %.6g  violations = %ld\n",
                    static_cast<unsigned long long>(one.seed),
                    r.final_regret ? r.final_regret->direct : 0.0, r.violations);
        return 0;
      } catch (const Error& e) {
        return report(e);
      }
    }));
  }
  int code = 0;
  for (auto& job : jobs) code = std::max(code, job.get());
  return code;
}

int cmd_bound(const std::string& summary, const std::string& out) {
  const std::string csv = emit_bound_curve(summary);
  std::ofstream file(out, std::ios::binary);
  if (!file) throw Error(ErrorKind::IoError, "cannot write " + out);
  file << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online safety-constrained controller synthesis"};
  app.require_subcommand(1);

  std::string model_path;
  auto* validate = app.add_subcommand("validate", "check a model file");
  validate->add_option("--model", model_path, "model JSON")->required();

  ExperimentConfig cfg;
  std::string attack = "arbitrary";
  std::string m_text = "1.0";
  std::string k1_path;
  double gamma_init = 0.0;
  int replicas = 1;
  bool no_verify = false, no_certify = false;
  long dos_start = 0, dos_end = 0;
  double gamma = 0, mu = 0, sigma = 0, w_max = 0, delta = 0;
  auto* run = app.add_subcommand("run", "run the online algorithm against an adversary");
  run->add_option("--model", cfg.model_path, "model JSON")->required();
  run->add_option("--horizon", cfg.horizon, "number of steps T")->required();
  run->add_option("--attack", attack, "arbitrary or dos")
      ->check(CLI::IsMember({"arbitrary", "dos"}));
  auto* o_start = run->add_option("--dos-start", dos_start, "first attacked step (default T/4)");
  auto* o_end = run->add_option("--dos-end", dos_end, "last attacked step (default T/2)");
  auto* o_gamma = run->add_option("--gamma", gamma, "attenuation level (default from model)");
  auto* o_mu = run->add_option("--mu", mu, "cost floor (default from model)");
  auto* o_sigma = run->add_option("--sigma", sigma, "cost trace cap (default from model)");
  auto* o_wmax = run->add_option("--w-max", w_max, "disturbance radius (default from model)");
  auto* o_delta = run->add_option("--delta", delta, "relative cost perturbation (default from model)");
  run->add_option("--m", m_text, "regret constant, a number or 'estimate'");
  auto* o_k1 = run->add_option("--k1", k1_path, "JSON file {\"K\": [[...]]} with the initial gain");
  auto* o_ginit = run->add_option("--gamma-init", gamma_init, "level for the stationary initial gain");
  run->add_option("--seed", cfg.seed, "random seed");
  run->add_option("--stride", cfg.trace_stride, "trace emission stride (default 1 or 10)");
  run->add_option("--replicas", replicas, "independent seeds run in parallel");
  run->add_flag("--no-verify", no_verify, "skip the per-step H-infinity check");
  run->add_flag("--no-certify", no_certify, "skip per-step certificates");
  run->add_option("--out", cfg.out_dir, "output directory")->required();

  std::string summary_path, bound_out;
  auto* bound = app.add_subcommand("bound", "regret bound curve from a run summary");
  bound->add_option("--summary", summary_path, "summary.json of a run")->required();
  bound->add_option("--out", bound_out, "CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return cmd_validate(model_path);
    if (*bound) return cmd_bound(summary_path, bound_out);

    cfg.attack = attack == "dos" ? AttackKind::DenialOfService : AttackKind::Arbitrary;
    if (*o_start) cfg.dos_start = dos_start;
    if (*o_end) cfg.dos_end = dos_end;
    if (*o_gamma) cfg.gamma = gamma;
    if (*o_mu) cfg.mu = mu;
    if (*o_sigma) cfg.sigma = sigma;
    if (*o_wmax) cfg.w_max = w_max;
    if (*o_delta) cfg.delta = delta;
    if (*o_ginit) cfg.gamma_init = gamma_init;
    if (*o_k1) {
      cfg.k1_source = K1Source::File;
      cfg.k1_path = k1_path;
    }
    if (m_text == "estimate") {
      cfg.estimate_m = true;
    } else {
      try {
        cfg.m = std::stod(m_text);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidConfig, "--m must be a number or 'estimate'");
      }
    }
    cfg.verify = !no_verify;
    cfg.certify = !no_certify;
    return cmd_run(cfg, replicas);
  } catch (const Error& e) {
    return report(e);
  }
}
