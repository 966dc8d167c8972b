#include "safectl/bench.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace safectl {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorKind::SchemaError, what); }

Matrix matrix_from(const json& doc, const char* key) {
  if (!doc.contains(key)) schema(std::string("missing field '") + key + "'");
  const json& rows = doc.at(key);
  if (!rows.is_array() || rows.empty()) schema(std::string(key) + " must be a non-empty array of rows");
  const auto r = Eigen::Index(rows.size());
  if (!rows[0].is_array()) schema(std::string(key) + " rows must be arrays");
  const auto c = Eigen::Index(rows[0].size());
  Matrix out(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows[i];
    if (!row.is_array() || Eigen::Index(row.size()) != c) {
      schema(std::string(key) + " is not rectangular");
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      if (!row[j].is_number()) schema(std::string(key) + " has a non-numeric entry");
      out(i, j) = row[j].get<double>();
    }
  }
  return out;
}

json matrix_to(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) schema(std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    schema(std::string("field '") + key + "' has the wrong type");
  }
}

double positive(const json& doc, const char* key) {
  const double v = field<double>(doc, key);
  if (!(v > 0.0) || !std::isfinite(v)) schema(std::string(key) + " must be finite and > 0");
  return v;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* attack_name(AttackKind k) {
  return k == AttackKind::DenialOfService ? "dos" : "arbitrary";
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json constants_json(const BoundConstants& c) {
  return {{"mu", c.mu},         {"nu", c.nu},           {"sigma", c.sigma},
          {"b_norm", c.b_norm}, {"kappa", c.kappa},     {"epsilon", c.epsilon},
          {"t_star", c.t_star}, {"t_star_raw", c.t_star_raw}, {"p_star", c.p_star},
          {"m", c.m}};
}

json config_json(const ExperimentConfig& cfg, const ResolvedRun& run) {
  json out;
  out["model_path"] = cfg.model_path;
  out["horizon"] = cfg.horizon;
  out["attack"] = {{"kind", attack_name(run.attack.kind)},
                   {"w_max", run.attack.w_max},
                   {"dos_start", run.attack.dos_start},
                   {"dos_end", run.attack.dos_end},
                   {"seed", run.attack.seed}};
  out["cost_perturb"] = {{"delta", run.costs.delta},
                         {"mu", run.costs.mu},
                         {"sigma", run.costs.sigma},
                         {"seed", run.costs.seed}};
  out["gamma"] = run.gamma;
  out["mu"] = run.mu;
  out["sigma"] = run.sigma;
  out["m"] = cfg.estimate_m ? json("estimate") : json(cfg.m);
  if (cfg.k1_source == K1Source::File) {
    out["k1_source"] = {{"kind", "file"}, {"path", cfg.k1_path}};
  } else {
    out["k1_source"] = {{"kind", "stationary"}, {"gamma_init", cfg.gamma_init.value_or(run.gamma)}};
  }
  out["out_dir"] = cfg.out_dir;
  out["seed"] = cfg.seed;
  out["trace_stride"] = run.stride;
  out["verify"] = cfg.verify;
  out["certify"] = cfg.certify;
  return out;
}

json summary_json(const ExperimentConfig& cfg, const Model& model, const RunResult& r) {
  json out;
  out["status"] = r.failure ? "failed" : "ok";
  if (r.failure) {
    out["error"] = r.failure->what();
    out["error_kind"] = std::string(to_string(r.failure->kind()));
    out["failed_step"] = r.failed_step;
  }
  out["model"] = model.name;
  out["horizon"] = cfg.horizon;
  out["steps_completed"] = long(r.trace.J.size());
  out["seed"] = cfg.seed;
  out["attack"] = attack_name(r.settings.attack.kind);
  out["gamma"] = r.settings.gamma;
  out["regret_final"] = r.final_regret ? json(r.final_regret->direct) : json(nullptr);
  out["regret_telescoped"] = r.final_regret ? json(r.final_regret->telescoped) : json(nullptr);
  out["bound_final"] = optional_number(r.final_bound);
  out["t_star"] = r.constants.t_star;
  out["t_star_raw"] = r.constants.t_star_raw;
  out["p_star"] = r.constants.p_star;
  out["nu_final"] = r.constants.nu;
  out["mu"] = r.constants.mu;
  out["sigma"] = r.constants.sigma;
  out["kappa"] = r.constants.kappa;
  out["epsilon"] = r.constants.epsilon;
  out["b_norm"] = r.constants.b_norm;
  out["m"] = r.constants.m;
  out["m_source"] = cfg.estimate_m && r.refinement ? "estimate" : "configured";
  if (r.refinement) {
    out["refinement"] = {{"t", r.refinement->t},
                         {"iterations", r.refinement->iterations},
                         {"tail_sum", r.refinement->tail_sum},
                         {"quadratic_rate", r.refinement->quadratic_rate},
                         {"m_estimate", optional_number(r.refinement->m_estimate)}};
  }
  out["trace_DDt"] = r.trace_ddt;
  out["J1"] = r.J1;
  out["violations"] = r.violations;
  out["certificate_failures"] = r.certificate_failures;
  if (!r.certificate_error.empty()) out["certificate_error"] = r.certificate_error;
  out["sequential_factor_max"] = r.sequential_max;
  out["sequential_exceedances"] = r.sequential_exceedances;
  out["constant_recomputations"] = r.constant_recomputations;
  out["dos_steps"] = r.dos_steps;
  out["dos_max_residual"] = r.dos_residual;
  out["constants"] = constants_json(r.constants);
  return out;
}

Gain read_gain(const fs::path& path, const LtiSystem& sys) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  Matrix K = matrix_from(doc, "K");
  if (K.rows() != sys.inputs() || K.cols() != sys.states()) {
    schema("K must be " + std::to_string(sys.inputs()) + "x" + std::to_string(sys.states()));
  }
  return {std::move(K)};
}

}  // namespace

// --- model files -------------------------------------------------------------

LtiSystem Model::plant() const {
  if (!continuous) return LtiSystem(A, B, D, C, E);
  const Discretized d = zoh_discretize(A, B, Matrix::Zero(A.rows(), 0), dt);
  return LtiSystem(d.A, d.B, D, C, E);
}

Model parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (!doc.is_object()) schema("model must be a JSON object");
  Model m;
  m.name = field<std::string>(doc, "name");
  if (doc.contains("description")) m.description = field<std::string>(doc, "description");
  m.continuous = field<bool>(doc, "continuous");
  m.dt = field<double>(doc, "dt");
  if (!(m.dt > 0.0)) throw Error(ErrorKind::NonPositiveDt, "dt = " + std::to_string(m.dt));
  m.A = matrix_from(doc, "A");
  m.B = matrix_from(doc, "B");
  m.C = matrix_from(doc, "C");
  m.D = matrix_from(doc, "D");
  m.E = matrix_from(doc, "E");
  m.gamma = positive(doc, "gamma");
  m.mu = positive(doc, "mu");
  m.sigma = positive(doc, "sigma");
  m.w_max = field<double>(doc, "w_max");
  if (!(m.w_max >= 0.0)) schema("w_max must be >= 0");
  if (doc.contains("delta")) {
    m.delta = field<double>(doc, "delta");
    if (!(m.delta >= 0.0)) schema("delta must be >= 0");
  }
  return m;
}

std::string write_model(const Model& m) {
  json doc;
  doc["name"] = m.name;
  if (!m.description.empty()) doc["description"] = m.description;
  doc["continuous"] = m.continuous;
  doc["dt"] = m.dt;
  doc["A"] = matrix_to(m.A);
  doc["B"] = matrix_to(m.B);
  doc["C"] = matrix_to(m.C);
  doc["D"] = matrix_to(m.D);
  doc["E"] = matrix_to(m.E);
  doc["gamma"] = m.gamma;
  doc["mu"] = m.mu;
  doc["sigma"] = m.sigma;
  doc["w_max"] = m.w_max;
  doc["delta"] = m.delta;
  return doc.dump(2) + "\n";
}

Model read_model_file(const fs::path& path) { return parse_model(read_text(path)); }

void write_model_file(const Model& model, const fs::path& path) {
  write_text(path, write_model(model));
}

LoadedModel load_model(const fs::path& path) {
  Model model = read_model_file(path);
  try {
    LtiSystem plant = model.plant();
    if (!is_stabilizable(plant)) {
      throw Error(ErrorKind::UnstabilizableModel, model.name + " has no stabilizing gain");
    }
    return {std::move(model), std::move(plant)};
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::DimensionMismatch) schema(e.what());
    throw;
  }
}

// --- experiments ---------------------------------------------------------------

ResolvedRun resolve(const ExperimentConfig& cfg, const Model& model) {
  if (cfg.horizon < 2) throw Error(ErrorKind::InvalidConfig, "horizon must be >= 2");
  if (cfg.trace_stride < 0) throw Error(ErrorKind::InvalidConfig, "trace stride must be >= 0");
  ResolvedRun r;
  r.gamma = cfg.gamma.value_or(model.gamma);
  r.mu = cfg.mu.value_or(model.mu);
  r.sigma = cfg.sigma.value_or(model.sigma);
  r.w_max = cfg.w_max.value_or(model.w_max);
  r.delta = cfg.delta.value_or(model.delta);
  for (double v : {r.gamma, r.mu, r.sigma}) {
    if (!(v > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "gamma, mu, sigma must be > 0");
  }
  if (!(cfg.m > 0.0)) throw Error(ErrorKind::NonPositiveParameter, "m must be > 0");
  r.stride = cfg.trace_stride > 0 ? cfg.trace_stride : (cfg.horizon <= 1000 ? 1 : 10);

  r.attack.kind = cfg.attack;
  r.attack.w_max = r.w_max;
  r.attack.seed = cfg.seed;
  if (cfg.attack == AttackKind::DenialOfService) {
    r.attack.dos_start = cfg.dos_start.value_or(std::max(2L, cfg.horizon / 4));
    r.attack.dos_end = cfg.dos_end.value_or(std::max(r.attack.dos_start, cfg.horizon / 2));
  }
  r.attack.validate();

  r.costs = {r.delta, r.mu, r.sigma, cfg.seed};

  r.online.gamma = r.gamma;
  r.online.mu = r.mu;
  r.online.sigma = r.sigma;
  r.online.m = cfg.m;
  r.online.estimate_m = cfg.estimate_m;
  r.online.verify = cfg.verify;
  r.online.certify = cfg.certify;
  return r;
}

RunResult run_simulation(const LtiSystem& sys, const Model& model, const ExperimentConfig& cfg,
                         const DisturbanceGenerator* generator) {
  RunResult result;
  result.settings = resolve(cfg, model);
  const ResolvedRun& run = result.settings;
  const DisturbanceGenerator disturbance =
      generator ? *generator : make_disturbance_generator(run.attack, sys);
  result.trace_ddt = sys.D().squaredNorm();
  const long T = cfg.horizon;

  auto [Q1, R1] = perturbed_costs(run.costs, sys.Q(), sys.R(), 1);
  Gain K1;
  if (cfg.k1_source == K1Source::File) {
    K1 = read_gain(cfg.k1_path, sys);
  } else {
    K1 = initial_gain(sys, Q1, R1, cfg.gamma_init.value_or(run.gamma)).gain;
  }

  OnlineState state = init(sys, Q1, R1, K1, run.online);
  std::optional<Gain> last_star;
  Vector x = Vector::Zero(sys.states());
  long t = 1;
  try {
    for (; t <= T; ++t) {
      if (t > 1) {
        auto [Q, R] = perturbed_costs(run.costs, sys.Q(), sys.R(), t);
        state = step(sys, std::move(state), Q, R, run.online);
      }
      const HistoryEntry& entry = state.history.back();
      result.trace.J.push_back(entry.J);
      if (!entry.valid) ++result.violations;
      if (t == 1) result.J1 = entry.J;

      const Transition tr = advance(sys, state.K, x, disturbance(t, -(state.K.K * x)));
      if (run.attack.in_window(t)) {
        const Vector ax = sys.A() * x;
        result.dos_residual = std::max(result.dos_residual, (tr.x_next - ax).norm());
        ++result.dos_steps;
      }
      x = tr.x_next;

      if ((T - t) % run.stride == 0) {
        const StationaryResult star =
            counterfactual(sys, state, run.online, last_star ? &*last_star : nullptr);
        last_star = star.gain;
        TraceRow row;
        row.t = t;
        row.J = entry.J;
        row.J_star = h2_cost_bound(star.solution, sys.D());
        row.regret = row.J - row.J_star;
        row.regret_norm = result.J1 > 0.0 ? row.regret / result.J1 : 0.0;
        if (t >= state.constants.t_star) row.bound = regret_bound(state.constants, sys.D(), t);
        row.pdiff = entry.pdiff;
        row.specrad = entry.spectral_radius;
        row.hinf = entry.hinf;
        row.nu = state.constants.nu;
        result.trace.rows.push_back(row);
      }
    }
  } catch (const Error& e) {
    result.failure = Error(e.kind(), "step " + std::to_string(t) + ": " + e.what());
    result.failed_step = t;
  }

  result.history = std::move(state.history);
  result.constants = state.constants;
  result.refinement = state.refinement;
  result.constant_recomputations = state.constant_events.size() - 1;
  result.certificate_failures = state.certificate_failures;
  result.certificate_error = state.certificate_error;
  result.sequential_max = state.sequential_max;
  result.sequential_exceedances = state.sequential_exceedances;
  if (!result.failure) {
    result.final_regret = regret(result.trace, T);
    if (T >= result.constants.t_star) result.final_bound = regret_bound(result.constants, sys.D(), T);
  }
  return result;
}

std::string trace_csv(const RegretTrace& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const TraceRow& r : trace.rows) {
    out += std::to_string(r.t) + "," + num(r.J) + "," + num(r.J_star) + "," + num(r.regret) + "," +
           num(r.regret_norm) + "," + (r.bound ? num(*r.bound) : "") + "," + num(r.pdiff) + "," +
           num(r.specrad) + "," + (r.hinf >= 0.0 ? num(r.hinf) : "") + "," + num(r.nu) + "\n";
  }
  return out;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const LoadedModel loaded = load_model(cfg.model_path);
  const ResolvedRun settings = resolve(cfg, loaded.model);
  const fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "config.echo.json", config_json(cfg, settings).dump(2) + "\n");

  RunResult result;
  try {
    result = run_simulation(loaded.plant, loaded.model, cfg);
  } catch (const Error& e) {
    // failed before the first step: record it and flush empty outputs
    result.settings = settings;
    result.failure = e;
    result.failed_step = 1;
  }
  write_text(dir / "trace.csv", trace_csv(result.trace));
  write_text(dir / "summary.json", summary_json(cfg, loaded.model, result).dump(2) + "\n");
  if (result.failure) throw *result.failure;
  return result;
}

std::string emit_bound_curve(const fs::path& summary_path) {
  json doc;
  try {
    doc = json::parse(read_text(summary_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, summary_path.string() + ": " + e.what());
  }
  const BoundConstants c =
      bound_constants(positive(doc, "mu"), positive(doc, "nu_final"), positive(doc, "sigma"),
                      positive(doc, "b_norm"), positive(doc, "m"));
  const long T = field<long>(doc, "horizon");
  const double trace = field<double>(doc, "trace_DDt");
  if (T < c.t_star) {
    throw Error(ErrorKind::HorizonBelowBurnIn,
                "T = " + std::to_string(T) + " < t* = " + std::to_string(c.t_star));
  }
  std::string out = "t,bound\n";
  for (long t = c.t_star; t <= T; ++t) {
    out += std::to_string(t) + "," + num(regret_bound(c, trace, t)) + "\n";
  }
  return out;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::SchemaError:
    case ErrorKind::IoError:
    case ErrorKind::InvalidConfig:
    case ErrorKind::AssumptionViolation:
    case ErrorKind::UnstabilizableModel:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NonSquare:
    case ErrorKind::NonPositiveDt:
    case ErrorKind::NonPositiveParameter:
    case ErrorKind::AsymmetricInput:
    case ErrorKind::InvalidTolerance:
    case ErrorKind::DosRequiresIdentityD:
    case ErrorKind::InadmissibleBase:
      return 2;
    default:
      return 3;
  }
}

}  // namespace safectl
