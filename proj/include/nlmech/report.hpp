#pragma once

// Markdown tables (grouped per case, one solver column block each) and SVG
// plots: residual convergence per solver (semilog-y) and wall time against
// thread count (log-log).

#include "nlmech/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace nlmech {
namespace detail {

inline std::string format_number(double v, int precision = 4) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

struct SvgCurve {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Minimal SVG 1.1 line plot with monotone tick labels on both axes.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::string& xLabel, const std::string& yLabel,
                           std::vector<SvgCurve> curves, bool logX, bool logY) {
  const double width = 640, height = 440;
  const double left = 70, right = 20, top = 40, bottom = 50;
  static const char* colors[] = {"#1f6fb2", "#c23b21", "#3f9142",
                                 "#8a5fb4", "#c28f21", "#444444"};

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (auto& c : curves)
    for (auto& [x, y] : c.points) {
      double px = logX ? std::log10(std::max(x, 1e-300)) : x;
      double py = logY ? std::log10(std::max(y, 1e-300)) : y;
      xmin = std::min(xmin, px);
      xmax = std::max(xmax, px);
      ymin = std::min(ymin, py);
      ymax = std::max(ymax, py);
    }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }

  auto sx = [&](double x) {
    double px = logX ? std::log10(std::max(x, 1e-300)) : x;
    return left + (px - xmin) / (xmax - xmin) * (width - left - right);
  };
  auto sy = [&](double y) {
    double py = logY ? std::log10(std::max(y, 1e-300)) : y;
    return height - bottom - (py - ymin) / (ymax - ymin) * (height - top - bottom);
  };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
     << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" "
        "font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\""
     << width - right << "\" y2=\"" << height - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
     << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";

  const int nticks = 5;
  for (int i = 0; i <= nticks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / nticks;
    const double fy = ymin + (ymax - ymin) * i / nticks;
    const double vx = logX ? std::pow(10.0, fx) : fx;
    const double vy = logY ? std::pow(10.0, fy) : fy;
    const double px = left + (width - left - right) * i / nticks;
    const double py = height - bottom - (height - top - bottom) * i / nticks;
    os << "<text x=\"" << px << "\" y=\"" << height - bottom + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">"
       << format_number(vx, 3) << "</text>\n";
    os << "<text x=\"" << left - 8 << "\" y=\"" << py + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << format_number(vy, 3)
       << "</text>\n";
  }
  os << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-size=\"13\">" << xLabel << "</text>\n";
  os << "<text x=\"16\" y=\"" << (top + height - bottom) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (top + height - bottom) / 2 << ")\">" << yLabel << "</text>\n";

  int ci = 0;
  for (const auto& curve : curves) {
    const char* color = colors[ci % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.6\" points=\"";
    for (auto& [x, y] : curve.points) os << sx(x) << "," << sy(y) << " ";
    os << "\"/>\n";
    for (auto& [x, y] : curve.points)
      os << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y)
         << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << width - right - 8 << "\" y=\"" << top + 16 * ci + 12
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
       << curve.label << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
}

}  // namespace detail

/// Writes report.md next to per-case SVG plots. Failed runs render as "F" in
/// the nit/lit cells. Returns the list of files it produced.
inline std::vector<std::string> emit_report(std::vector<RunRecord> records,
                                            const std::string& mdPath) {
  if (records.empty()) throw std::invalid_argument("no records to report");
  std::vector<std::string> produced;
  const std::string stem = mdPath.size() > 3 && mdPath.ends_with(".md")
                               ? mdPath.substr(0, mdPath.size() - 3)
                               : mdPath;

  std::ofstream os(mdPath);
  if (!os) throw std::runtime_error("cannot open " + mdPath);
  produced.push_back(mdPath);
  os << "# Nonlinear solver benchmark report\n\n";
  os << "nit = nonlinear iterations, lit = average linear iterations per "
        "nonlinear iteration, t_sol = solve wall time in seconds (assembly "
        "and solve; mesh generation excluded). Failed runs are marked F.\n";

  std::vector<std::string> cases;
  for (const auto& r : records)
    if (std::find(cases.begin(), cases.end(), r.caseName) == cases.end())
      cases.push_back(r.caseName);

  for (const auto& caseName : cases) {
    std::vector<std::string> solvers;
    std::vector<std::array<double, 3>> keys;  // param, threads, dofs
    for (const auto& r : records) {
      if (r.caseName != caseName) continue;
      if (std::find(solvers.begin(), solvers.end(), r.solver) == solvers.end())
        solvers.push_back(r.solver);
      const std::array<double, 3> key = {r.param, double(r.threads),
                                         double(r.dofs)};
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());

    os << "\n## Case " << caseName << "\n\n";
    os << "| param | threads | DoFs |";
    for (const auto& s : solvers)
      os << " " << short_label(solver_from_string(s)) << " nit | "
         << short_label(solver_from_string(s)) << " lit | "
         << short_label(solver_from_string(s)) << " t_sol |";
    os << "\n|---|---|---|";
    for (std::size_t i = 0; i < solvers.size(); ++i) os << "---|---|---|";
    os << "\n";
    for (const auto& key : keys) {
      os << "| " << detail::format_number(key[0]) << " | " << int(key[1])
         << " | " << int(key[2]) << " |";
      for (const auto& s : solvers) {
        const RunRecord* found = nullptr;
        for (const auto& r : records)
          if (r.caseName == caseName && r.solver == s && r.param == key[0] &&
              r.threads == int(key[1]) && r.dofs == int(key[2]))
            found = &r;
        if (!found) {
          os << " - | - | - |";
        } else if (found->status != "converged") {
          os << " F | F | " << detail::format_number(found->tSol) << " |";
        } else {
          os << " " << detail::format_number(found->nit) << " | "
             << detail::format_number(found->lit) << " | "
             << detail::format_number(found->tSol) << " |";
        }
      }
      os << "\n";
    }

    // residual convergence plot (semilog-y), one curve per solver
    std::vector<detail::SvgCurve> resCurves;
    for (const auto& s : solvers) {
      for (const auto& r : records) {
        if (r.caseName != caseName || r.solver != s ||
            r.residualHistory.empty())
          continue;
        detail::SvgCurve c;
        c.label = short_label(solver_from_string(s));
        for (std::size_t i = 0; i < r.residualHistory.size(); ++i)
          c.points.push_back({double(i), r.residualHistory[i]});
        resCurves.push_back(std::move(c));
        break;  // one representative history per solver
      }
    }
    if (!resCurves.empty()) {
      const std::string path = stem + "." + caseName + ".residuals.svg";
      detail::write_svg_plot(path, "Residual convergence: " + caseName,
                             "nonlinear iteration", "residual norm",
                             std::move(resCurves), false, true);
      os << "\n![residuals](" << path << ")\n";
      produced.push_back(path);
    }

    // wall time against threads (log-log) whenever thread data exists
    std::vector<detail::SvgCurve> timeCurves;
    for (const auto& s : solvers) {
      detail::SvgCurve c;
      c.label = short_label(solver_from_string(s));
      for (const auto& key : keys)
        for (const auto& r : records)
          if (r.caseName == caseName && r.solver == s && r.param == key[0] &&
              r.threads == int(key[1]) && r.dofs == int(key[2]))
            c.points.push_back({double(r.threads), std::max(r.tSol, 1e-9)});
      std::sort(c.points.begin(), c.points.end());
      c.points.erase(std::unique(c.points.begin(), c.points.end(),
                                 [](auto& a, auto& b) { return a.first == b.first; }),
                     c.points.end());
      if (!c.points.empty()) timeCurves.push_back(std::move(c));
    }
    if (!timeCurves.empty()) {
      const std::string path = stem + "." + caseName + ".threads.svg";
      detail::write_svg_plot(path, "Wall time vs threads: " + caseName,
                             "threads", "t_sol [s]", std::move(timeCurves),
                             true, true);
      os << "\n![threads](" << path << ")\n";
      produced.push_back(path);
    }
  }
  return produced;
}

}  // namespace nlmech
