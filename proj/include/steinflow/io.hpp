#pragma once

// Output files of a run: trajectory.csv, particles_<iter>.csv, meta.json and
// an optional SVG chart of KSD (and KL when tracked) against the x axis.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "steinflow/errors.hpp"
#include "steinflow/svgd.hpp"

namespace steinflow::io {

enum class Axis { Iteration, Time };

/// Shortest text that reads back as the same double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

inline std::string trajectory_csv(const TrajectoryRecord& record, Axis axis) {
  std::ostringstream out;
  out << (axis == Axis::Iteration ? "iteration" : "time") << ",epsilon,ksd,kl\n";
  for (const auto& row : record.rows) {
    out << (axis == Axis::Iteration ? std::to_string(row.iteration) : format_double(row.time)) << ','
        << format_double(row.epsilon) << ',' << format_double(row.ksd) << ',';
    if (row.kl) out << format_double(*row.kl);
    out << '\n';
  }
  return out.str();
}

inline std::string particles_csv(const Matrix& positions) {
  std::ostringstream out;
  for (Eigen::Index c = 0; c < positions.cols(); ++c) out << (c ? "," : "") << 'x' << c;
  out << '\n';
  for (Eigen::Index r = 0; r < positions.rows(); ++r) {
    for (Eigen::Index c = 0; c < positions.cols(); ++c) out << (c ? "," : "") << format_double(positions(r, c));
    out << '\n';
  }
  return out.str();
}

/// Reads a particles CSV; a first line that does not parse as numbers is a header.
inline Matrix read_particles_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows.empty() && line_no == 1) continue;
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": not a row of numbers");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path.string() + ": no particles");
  Matrix X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return X;
}

/// Log-scale line chart of KSD (and tracked KL where positive) per row.
inline std::string trajectory_svg(const TrajectoryRecord& record, Axis axis) {
  const double W = 640, H = 400, pad = 50;
  auto xval = [&](const TrajectoryRow& r) { return axis == Axis::Iteration ? static_cast<double>(r.iteration) : r.time; };
  double xmin = 0, xmax = 1, ymin = INFINITY, ymax = -INFINITY;
  if (!record.rows.empty()) {
    xmin = xval(record.rows.front());
    xmax = std::max(xval(record.rows.back()), xmin + 1e-12);
  }
  auto consider = [&](double v) {
    if (v > 0.0 && std::isfinite(v)) {
      ymin = std::min(ymin, std::log10(v));
      ymax = std::max(ymax, std::log10(v));
    }
  };
  for (const auto& r : record.rows) {
    consider(r.ksd);
    if (r.kl) consider(*r.kl);
  }
  if (!(ymax >= ymin)) ymin = -1, ymax = 0;
  if (ymax - ymin < 1e-9) ymin -= 0.5, ymax += 0.5;
  auto px = [&](double x) { return pad + (x - xmin) / (xmax - xmin) * (W - 2 * pad); };
  auto py = [&](double v) { return H - pad - (std::log10(v) - ymin) / (ymax - ymin) * (H - 2 * pad); };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << (axis == Axis::Iteration ? "iteration" : "time") << "</text>\n"
      << "<text x=\"12\" y=\"" << pad - 12 << "\">log10 scale [" << format_double(ymin) << ", " << format_double(ymax)
      << "]</text>\n";
  auto polyline = [&](const char* color, auto get) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& r : record.rows) {
      const std::optional<double> v = get(r);
      if (v && *v > 0.0 && std::isfinite(*v)) out << px(xval(r)) << ',' << py(*v) << ' ';
    }
    out << "\"/>\n";
  };
  polyline("steelblue", [](const TrajectoryRow& r) { return std::optional<double>(r.ksd); });
  polyline("firebrick", [](const TrajectoryRow& r) { return r.kl; });
  out << "<text x=\"" << W - pad << "\" y=\"" << pad << "\" fill=\"steelblue\" text-anchor=\"end\">ksd</text>\n"
      << "<text x=\"" << W - pad << "\" y=\"" << pad + 16 << "\" fill=\"firebrick\" text-anchor=\"end\">kl</text>\n"
      << "</svg>\n";
  return out.str();
}

/// Writes trajectory.csv, one particles_<iter>.csv per snapshot, meta.json and
/// (if asked) trajectory.svg into `dir`.
inline void write_run(const std::filesystem::path& dir, const TrajectoryRecord& record, Axis axis,
                      const nlohmann::json& meta, bool svg) {
  std::filesystem::create_directories(dir);
  open_for_write(dir / "trajectory.csv") << trajectory_csv(record, axis);
  for (const auto& [iter, positions] : record.snapshots) {
    open_for_write(dir / ("particles_" + std::to_string(iter) + ".csv")) << particles_csv(positions);
  }
  open_for_write(dir / "meta.json") << meta.dump(2) << '\n';
  if (svg) open_for_write(dir / "trajectory.svg") << trajectory_svg(record, axis);
}

}  // namespace steinflow::io
