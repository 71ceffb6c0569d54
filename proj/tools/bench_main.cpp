// Benchmark CLI: run one case, sweep an axis, or render a report from CSV.
//
//   bench run   --case cook --solver inexact-newton --refine 2 --order p1
//               --param 1e6 --threads 4 --out results.csv
//   bench sweep --case twist --axis size --values 1,2 --solvers newton,inexact-newton
//               --out sweep.csv
//   bench report results.csv --out report.md
//
// Exit code 0 means every requested run completed (failed solves are
// recorded in the status column); nonzero signals a harness error.

#include "nlmech/bench.hpp"
#include "nlmech/report.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace nlmech;

namespace {

ElementFamily order_from_string(const std::string& s) {
  if (s == "p1" || s == "P1") return ElementFamily::P1;
  if (s == "p2" || s == "P2") return ElementFamily::P2;
  throw CLI::ValidationError("--order", "expected p1 or p2");
}

std::vector<SolverKind> solvers_from_csv(const std::string& csv) {
  std::vector<SolverKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(solver_from_string(item));
  if (out.empty()) throw CLI::ValidationError("--solvers", "empty list");
  return out;
}

std::vector<double> values_from_csv(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

void export_solution_vtk(const ProblemDefinition& problem, const Vector& x,
                         const std::string& path) {
  const Mesh& mesh = *problem.mesh;
  std::vector<Vec3> disp(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    disp[v] = x.segment<3>(3 * static_cast<Eigen::Index>(v));
  write_vtk(mesh, path, &disp);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonlinear elasticity solver benchmarks"};
  app.require_subcommand(1);

  std::string caseName = "cook", solver = "newton", order = "p1";
  std::string configPath, outPath = "results.csv", vtkPath;
  std::string axis = "size", values = "1,2", solvers = "newton";
  std::string reportCsv, reportOut = "report.md";
  int refine = 1, threads = 1, steps = 1, ramp = 1;
  double param = -1.0;

  auto addCommonRunOptions = [&](CLI::App* cmd) {
    cmd->add_option("--case", caseName, "cook | twist | heartbeat");
    cmd->add_option("--refine", refine, "mesh refinement level")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--order", order, "p1 | p2 (twist is always P2-P0)");
    cmd->add_option("--param", param,
                    "case parameter: tau (cook), angle (twist), peak "
                    "activation (heartbeat); case default when omitted");
    cmd->add_option("--threads", threads, "worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--steps", steps, "heartbeat time steps")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--ramp", ramp, "equal load increments (static cases)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--config", configPath,
                    "solver option file (PETSc-style key names)");
    cmd->add_option("--out", outPath, "output CSV path");
  };

  CLI::App* run = app.add_subcommand("run", "run one case with one solver");
  addCommonRunOptions(run);
  run->add_option("--solver", solver,
                  "newton | inexact-newton | bfgs | inexact-bfgs | "
                  "newton-preonly | quasi-exact-bfgs");
  run->add_option("--export-vtk", vtkPath,
                  "write the final displacement as legacy VTK");

  CLI::App* sweepCmd = app.add_subcommand("sweep", "sweep one axis");
  addCommonRunOptions(sweepCmd);
  sweepCmd->add_option("--axis", axis, "size | param | threads");
  sweepCmd->add_option("--values", values, "comma-separated axis values");
  sweepCmd->add_option("--solvers", solvers, "comma-separated solver list");

  CLI::App* reportCmd =
      app.add_subcommand("report", "render Markdown + SVG from a results CSV");
  reportCmd->add_option("csv", reportCsv, "results CSV")->required();
  reportCmd->add_option("--out", reportOut, "output Markdown path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run || *sweepCmd) {
      CaseSpec spec;
      spec.caseName = case_from_string(caseName);
      spec.refinement = refine;
      spec.order = order_from_string(order);
      spec.caseParameter =
          param > 0.0 ? param : CaseSpec::defaultParameter(spec.caseName);
      spec.threads = threads;
      spec.timeSteps = steps;
      spec.loadRamp = ramp;
      if (!configPath.empty())
        spec.solver = parse_config_file(configPath, spec.solver);

      std::vector<RunRecord> records;
      if (*run) {
        const SolverKind kind = configPath.empty()
                                    ? solver_from_string(solver)
                                    : spec.solver.kind;
        Vector solution;
        std::shared_ptr<ProblemDefinition> problem;
        records.push_back(run_case(spec, kind, &solution, &problem));
        if (!vtkPath.empty() && problem)
          export_solution_vtk(*problem, solution, vtkPath);
      } else {
        records = sweep(spec, axis_from_string(axis), values_from_csv(values),
                        solvers_from_csv(solvers));
      }
      write_csv(records, outPath);
      write_residual_histories(records, outPath + ".residuals.csv");
      for (const auto& r : records)
        std::cout << r.caseName << " " << r.solver << " dofs=" << r.dofs
                  << " nit=" << r.nit << " lit=" << r.lit
                  << " t_sol=" << r.tSol << " status=" << r.status << "\n";
    } else if (*reportCmd) {
      std::vector<RunRecord> records = read_csv(reportCsv);
      read_residual_histories(reportCsv + ".residuals.csv", records);
      for (const auto& f : emit_report(std::move(records), reportOut))
        std::cout << "wrote " << f << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
