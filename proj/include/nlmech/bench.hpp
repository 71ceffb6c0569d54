#pragma once

// Benchmark harness: runs one of the three cases with a chosen nonlinear
// solver, sweeps problem size / data magnitude / thread counts, and reads or
// writes the result tables as CSV.

#include "nlmech/fem_system.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace nlmech {

enum class CaseName { Cook, Twist, Heartbeat };

inline const char* to_string(CaseName c) {
  switch (c) {
    case CaseName::Cook: return "cook";
    case CaseName::Twist: return "twist";
    case CaseName::Heartbeat: return "heartbeat";
  }
  return "unknown";
}

inline CaseName case_from_string(const std::string& s) {
  if (s == "cook") return CaseName::Cook;
  if (s == "twist") return CaseName::Twist;
  if (s == "heartbeat") return CaseName::Heartbeat;
  throw std::invalid_argument("unknown case: " + s);
}

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::NewtonKrylov: return "newton";
    case SolverKind::InexactNewton: return "inexact-newton";
    case SolverKind::BfgsPreonly: return "bfgs";
    case SolverKind::InexactBfgs: return "inexact-bfgs";
    case SolverKind::NewtonPreonly: return "newton-preonly";
    case SolverKind::QuasiExactBfgs: return "quasi-exact-bfgs";
  }
  return "unknown";
}

inline SolverKind solver_from_string(const std::string& s) {
  if (s == "newton" || s == "nk") return SolverKind::NewtonKrylov;
  if (s == "inexact-newton" || s == "ink") return SolverKind::InexactNewton;
  if (s == "bfgs" || s == "b") return SolverKind::BfgsPreonly;
  if (s == "inexact-bfgs" || s == "ib") return SolverKind::InexactBfgs;
  if (s == "newton-preonly") return SolverKind::NewtonPreonly;
  if (s == "quasi-exact-bfgs") return SolverKind::QuasiExactBfgs;
  throw std::invalid_argument("unknown solver: " + s);
}

/// Short labels used in the report tables.
inline const char* short_label(SolverKind k) {
  switch (k) {
    case SolverKind::NewtonKrylov: return "NK";
    case SolverKind::InexactNewton: return "iNK";
    case SolverKind::BfgsPreonly: return "B";
    case SolverKind::InexactBfgs: return "iB";
    case SolverKind::NewtonPreonly: return "N-pre";
    case SolverKind::QuasiExactBfgs: return "qeB";
  }
  return "?";
}

struct CaseSpec {
  CaseName caseName = CaseName::Cook;
  int refinement = 1;
  ElementFamily order = ElementFamily::P1;  // twist always runs P2-P0
  double caseParameter = 0.0;  // tau (cook), angle (twist), peak (heartbeat)
  int timeSteps = 1;           // heartbeat only
  int threads = 1;
  int loadRamp = 1;  // optional equal-increment load ramping
  NonlinearConfig solver{};

  CaseSpec() { caseParameter = defaultParameter(CaseName::Cook); }

  static double defaultParameter(CaseName c) {
    switch (c) {
      case CaseName::Cook: return 1e6;
      case CaseName::Twist: return std::numbers::pi / 6.0;
      case CaseName::Heartbeat: return 1e4;
    }
    return 0.0;
  }

  void validate() const {
    if (caseParameter <= 0.0)
      throw std::invalid_argument("case parameter must be positive");
    if (refinement < 1) throw std::invalid_argument("refinement must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (timeSteps < 1) throw std::invalid_argument("timeSteps must be >= 1");
    if (loadRamp < 1) throw std::invalid_argument("loadRamp must be >= 1");
  }
};

/// One benchmark result row; mirrors the CSV schema
/// case,dofs,solver,param,threads,nit,lit,t_sol,status.
struct RunRecord {
  std::string caseName;
  int dofs = 0;
  std::string solver;
  double param = 0.0;
  int threads = 1;
  double nit = 0.0;  // fractional for time-averaged heartbeat runs
  double lit = 0.0;
  double tSol = 0.0;
  std::string status;
  std::vector<double> residualHistory;  // in-memory only, for the plots

  bool operator==(const RunRecord& o) const {
    return caseName == o.caseName && dofs == o.dofs && solver == o.solver &&
           param == o.param && threads == o.threads && nit == o.nit &&
           lit == o.lit && tSol == o.tSol && status == o.status;
  }
};

namespace detail {

inline std::shared_ptr<ProblemDefinition> build_case_problem(
    const CaseSpec& spec, double loadFraction) {
  switch (spec.caseName) {
    case CaseName::Cook: {
      auto mesh = std::make_shared<Mesh>(build_cook_mesh(spec.refinement));
      CookOptions opts;
      opts.order = spec.order;
      opts.tau = spec.caseParameter * loadFraction;
      return std::make_shared<ProblemDefinition>(
          make_cook_problem(std::move(mesh), opts));
    }
    case CaseName::Twist: {
      auto mesh = std::make_shared<Mesh>(build_bar_mesh(
          spec.refinement, spec.refinement, 2 * spec.refinement));
      TwistOptions opts;
      opts.angle = spec.caseParameter * loadFraction;
      return std::make_shared<ProblemDefinition>(
          make_twist_problem(std::move(mesh), opts));
    }
    case CaseName::Heartbeat: {
      auto mesh = std::make_shared<Mesh>(build_ellipsoid_mesh(
          Vec3(0.017, 0.017, 0.060), 0.008, 0.02, spec.refinement));
      HeartbeatOptions opts;
      opts.order = spec.order;
      opts.activation.peak = spec.caseParameter;
      return std::make_shared<ProblemDefinition>(
          make_heartbeat_problem(std::move(mesh), opts));
    }
  }
  throw std::logic_error("unknown case");
}

}  // namespace detail

/// Runs one case with one solver. Heartbeat runs timeSteps Newmark steps and
/// averages nit/lit over them; a solver failure is recorded in the status,
/// never thrown. Wall time covers assembly and solve, not mesh generation.
inline RunRecord run_case(const CaseSpec& spec, SolverKind solverKind,
                          Vector* finalState = nullptr,
                          std::shared_ptr<ProblemDefinition>* problemOut = nullptr) {
  spec.validate();
  set_thread_count(spec.threads);
  NonlinearConfig cfg = spec.solver;
  cfg.kind = solverKind;

  RunRecord rec;
  rec.caseName = to_string(spec.caseName);
  rec.solver = to_string(solverKind);
  rec.param = spec.caseParameter;
  rec.threads = spec.threads;

  if (spec.caseName == CaseName::Heartbeat) {
    auto problem = detail::build_case_problem(spec, 1.0);
    rec.dofs = problem->totalDofs();
    const ActivationParams actParams{spec.caseParameter, 0.8};
    FemSystem system(problem, PrecondKind::AmgBlock);
    double nitSum = 0.0;
    long litSum = 0;
    long nitTotal = 0;
    rec.status = to_string(SolveStatus::Converged);
    Vector x = system.initialGuess();
    for (int step = 1; step <= spec.timeSteps; ++step) {
      DynamicState& dyn = *system.problem().dynamics;
      const double t = step * dyn.dt;
      system.problem().activeGamma = activation(t, actParams);
      const SolveReport report = run_solver(system, cfg, x);
      rec.tSol += report.wallTimeSeconds;
      nitSum += report.nit;
      nitTotal += report.nit;
      litSum += report.totalLinearIts;
      if (step == 1) rec.residualHistory = report.residualNormHistory;
      if (report.status != SolveStatus::Converged) {
        rec.status = to_string(report.status);
        break;
      }
      auto [vNew, aNew] = newmark_advance(dyn, x);
      dyn.d = x;
      dyn.v = std::move(vNew);
      dyn.a = std::move(aNew);
    }
    rec.nit = nitSum / spec.timeSteps;
    rec.lit = nitTotal > 0 ? static_cast<double>(litSum) / nitTotal : 0.0;
    if (finalState) *finalState = x;
    if (problemOut) *problemOut = problem;
    return rec;
  }

  // static cases, with optional equal-increment load ramping
  double nitSum = 0.0;
  long litSum = 0, nitTotal = 0;
  Vector x;
  rec.status = to_string(SolveStatus::Converged);
  for (int inc = 1; inc <= spec.loadRamp; ++inc) {
    auto problem =
        detail::build_case_problem(spec, static_cast<double>(inc) / spec.loadRamp);
    rec.dofs = problem->totalDofs();
    if (problemOut) *problemOut = problem;
    auto system = make_fem_system(problem);
    if (x.size() != system->size())
      x = system->initialGuess();
    else
      system->project(x);  // re-impose the incremented boundary values
    const SolveReport report = run_solver(*system, cfg, x);
    rec.tSol += report.wallTimeSeconds;
    nitSum += report.nit;
    nitTotal += report.nit;
    litSum += report.totalLinearIts;
    if (inc == spec.loadRamp) rec.residualHistory = report.residualNormHistory;
    if (report.status != SolveStatus::Converged) {
      rec.status = to_string(report.status);
      break;
    }
  }
  rec.nit = nitSum;
  rec.lit = nitTotal > 0 ? static_cast<double>(litSum) / nitTotal : 0.0;
  if (finalState) *finalState = x;
  return rec;
}

enum class SweepAxis { Size, Parameter, Threads };

inline SweepAxis axis_from_string(const std::string& s) {
  if (s == "size") return SweepAxis::Size;
  if (s == "param" || s == "parameter") return SweepAxis::Parameter;
  if (s == "threads") return SweepAxis::Threads;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

/// One record per (value, solver); individual failures land in the status
/// column of their row.
inline std::vector<RunRecord> sweep(const CaseSpec& base, SweepAxis axis,
                                    const std::vector<double>& values,
                                    const std::vector<SolverKind>& solvers) {
  if (values.empty()) throw std::invalid_argument("empty sweep values");
  std::vector<RunRecord> records;
  for (double v : values)
    for (SolverKind solver : solvers) {
      CaseSpec spec = base;
      switch (axis) {
        case SweepAxis::Size: spec.refinement = static_cast<int>(v); break;
        case SweepAxis::Parameter: spec.caseParameter = v; break;
        case SweepAxis::Threads: spec.threads = static_cast<int>(v); break;
      }
      records.push_back(run_case(spec, solver));
    }
  return records;
}

// ---------------------------------------------------------------------------
// CSV round trip

inline void write_csv(const std::vector<RunRecord>& records,
                      const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "case,dofs,solver,param,threads,nit,lit,t_sol,status\n";
  os.precision(17);
  for (const auto& r : records)
    os << r.caseName << "," << r.dofs << "," << r.solver << "," << r.param
       << "," << r.threads << "," << r.nit << "," << r.lit << "," << r.tSol
       << "," << r.status << "\n";
}

inline std::vector<RunRecord> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("empty CSV: " + path);
  if (line != "case,dofs,solver,param,threads,nit,lit,t_sol,status")
    throw std::runtime_error("unexpected CSV header in " + path);
  std::vector<RunRecord> records;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    RunRecord r;
    std::getline(ss, r.caseName, ',');
    std::getline(ss, field, ',');
    r.dofs = std::stoi(field);
    std::getline(ss, r.solver, ',');
    std::getline(ss, field, ',');
    r.param = std::stod(field);
    std::getline(ss, field, ',');
    r.threads = std::stoi(field);
    std::getline(ss, field, ',');
    r.nit = std::stod(field);
    std::getline(ss, field, ',');
    r.lit = std::stod(field);
    std::getline(ss, field, ',');
    r.tSol = std::stod(field);
    std::getline(ss, r.status, ',');
    records.push_back(std::move(r));
  }
  return records;
}

/// Iteration histories sidecar (enables the convergence plots when a report
/// is generated from CSV files).
inline void write_residual_histories(const std::vector<RunRecord>& records,
                                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "case,solver,param,threads,iter,resnorm\n";
  os.precision(17);
  for (const auto& r : records)
    for (std::size_t i = 0; i < r.residualHistory.size(); ++i)
      os << r.caseName << "," << r.solver << "," << r.param << ","
         << r.threads << "," << i << "," << r.residualHistory[i] << "\n";
}

inline void read_residual_histories(const std::string& path,
                                    std::vector<RunRecord>& records) {
  std::ifstream is(path);
  if (!is) return;  // optional sidecar
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string caseName, solver, field;
    std::getline(ss, caseName, ',');
    std::getline(ss, solver, ',');
    std::getline(ss, field, ',');
    const double param = std::stod(field);
    std::getline(ss, field, ',');
    const int threads = std::stoi(field);
    std::getline(ss, field, ',');
    std::getline(ss, field, ',');
    const double value = std::stod(field);
    for (auto& r : records)
      if (r.caseName == caseName && r.solver == solver && r.param == param &&
          r.threads == threads) {
        r.residualHistory.push_back(value);
        break;
      }
  }
}

// ---------------------------------------------------------------------------
// solver configuration files with PETSc-style key names, e.g.
//   snes_type    qn
//   ksp_type     preonly
//   snes_qn_m    50

inline NonlinearConfig parse_config_text(std::istream& is,
                                         NonlinearConfig base = {}) {
  NonlinearConfig cfg = base;
  std::string snesType = "newtonls", kspType = "gmres", lineSearch = "basic";
  bool useEw = false;
  double kspRtol = -1.0, kspAtol = -1.0;
  int kspMaxIt = -1;

  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::stringstream ss(line);
    std::string key, value;
    if (!(ss >> key)) continue;
    if (!key.empty() && key.front() == '-') key.erase(0, 1);
    ss >> value;
    if (key == "snes_type") snesType = value;
    else if (key == "ksp_type") kspType = value;
    else if (key == "snes_linesearch_type") lineSearch = value;
    else if (key == "snes_ksp_ew") useEw = value.empty() || value == "1" || value == "true";
    else if (key == "snes_ksp_ew_rtol0") cfg.ewInitial = std::stod(value);
    else if (key == "snes_ksp_ew_rtolmax") cfg.ewMax = std::stod(value);
    else if (key == "snes_qn_m") cfg.lbfgsMemory = std::stoi(value);
    else if (key == "snes_rtol") cfg.rtol = std::stod(value);
    else if (key == "snes_atol") cfg.atol = std::stod(value);
    else if (key == "snes_max_it") cfg.maxIterations = std::stoi(value);
    else if (key == "ksp_rtol") kspRtol = std::stod(value);
    else if (key == "ksp_atol") kspAtol = std::stod(value);
    else if (key == "ksp_max_it") kspMaxIt = std::stoi(value);
    else if (key == "snes_qn_type" || key == "snes_qn_scale_type" ||
             key == "pc_type") {
      // accepted for option-string parity; the harness wires these itself
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  if (lineSearch != "basic")
    throw std::invalid_argument("only the full-step line search is supported");

  if (snesType == "newtonls") {
    if (kspType == "preonly") cfg.kind = SolverKind::NewtonPreonly;
    else cfg.kind = useEw ? SolverKind::InexactNewton : SolverKind::NewtonKrylov;
  } else if (snesType == "qn") {
    if (kspType == "preonly") cfg.kind = SolverKind::BfgsPreonly;
    else if (kspRtol >= 0.0 && kspRtol < 1e-3) cfg.kind = SolverKind::QuasiExactBfgs;
    else cfg.kind = SolverKind::InexactBfgs;
  } else {
    throw std::invalid_argument("unknown snes_type: " + snesType);
  }

  const bool inexact = cfg.kind == SolverKind::InexactNewton ||
                       cfg.kind == SolverKind::InexactBfgs;
  KrylovConfig& target = inexact ? cfg.inexactLinear : cfg.quasiExactLinear;
  if (kspRtol >= 0.0) target.rtol = kspRtol;
  if (kspAtol >= 0.0) target.atol = kspAtol;
  if (kspMaxIt > 0) target.maxIterations = kspMaxIt;
  return cfg;
}

inline NonlinearConfig parse_config_file(const std::string& path,
                                         NonlinearConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  return parse_config_text(is, base);
}

}  // namespace nlmech
