// Copyright 2026 The blockrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "blockrecon/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "blockrecon/textio.hpp"

namespace blockrecon {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 28;
constexpr int kMarginBottom = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range data_range(std::span<const PlotSeries> series, bool use_y) {
  Range r;
  bool any = false;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      double v;
      if (use_y) {
        if (!s.y[i].has_value()) continue;
        v = *s.y[i];
      } else {
        v = s.x[i];
      }
      if (!any) {
        r.lo = r.hi = v;
        any = true;
      } else {
        r.lo = std::min(r.lo, v);
        r.hi = std::max(r.hi, v);
      }
    }
  }
  if (!any) return {0.0, 1.0};
  if (r.hi <= r.lo) r.hi = r.lo + 1.0;
  return r;
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

void write_csv(const std::string& path, std::span<const PlotSeries> series) {
  std::ofstream csv(path);
  if (!csv) throw std::runtime_error("cannot write " + path);
  csv << "series,x,y\n";
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      csv << s.label << ',' << format_double(s.x[i]) << ','
          << (s.y[i].has_value() ? format_double(*s.y[i]) : "") << '\n';
    }
  }
}

std::vector<std::string> write_plot(const std::string& out_dir, const std::string& name,
                                    const std::string& x_label, const std::string& y_label,
                                    std::span<const PlotSeries> series, bool lines) {
  const std::string svg_path = out_dir + "/" + name + ".svg";
  const std::string csv_path = out_dir + "/" + name + ".csv";
  write_csv(csv_path, series);

  Range xr = data_range(series, false);
  Range yr = data_range(series, true);
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double y) { return kMarginTop + (1.0 - (y - yr.lo) / (yr.hi - yr.lo)) * plot_h; };

  std::ofstream svg(svg_path);
  if (!svg) throw std::runtime_error("cannot write " + svg_path);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"16\" font-size=\"13\" text-anchor=\"middle\">"
      << svg_escape(name) << "</text>\n";

  // Frame and ticks.
  svg << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\"" << plot_w
      << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", fx);
    svg << "<text x=\"" << px(fx) << "\" y=\"" << kHeight - kMarginBottom + 16
        << "\" font-size=\"10\" text-anchor=\"middle\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.3g", fy);
    svg << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << py(fy) + 3
        << "\" font-size=\"10\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">" << svg_escape(x_label) << "</text>\n";
  svg << "<text x=\"14\" y=\"" << kHeight / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kHeight / 2
      << ")\">" << svg_escape(y_label) << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (lines) {
      // Null values break the polyline into segments (gaps stay visible).
      std::string points;
      auto flush = [&]() {
        if (!points.empty()) {
          svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
              << points << "\"/>\n";
          points.clear();
        }
      };
      for (size_t i = 0; i < s.x.size(); ++i) {
        if (!s.y[i].has_value()) {
          flush();
          continue;
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(s.x[i]), py(*s.y[i]));
        points += buf;
      }
      flush();
    }
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!s.y[i].has_value()) continue;
      svg << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(*s.y[i]) << "\" r=\""
          << (lines ? 1.5 : 2.5) << "\" fill=\"" << color << "\"/>\n";
    }
    svg << "<text x=\"" << kWidth - kMarginRight - 4 << "\" y=\"" << kMarginTop + 14 + 14 * si
        << "\" font-size=\"11\" text-anchor=\"end\" fill=\"" << color << "\">" << svg_escape(s.label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return {svg_path, csv_path};
}

}  // namespace

std::vector<std::string> write_line_plot(const std::string& out_dir, const std::string& name,
                                         const std::string& x_label, const std::string& y_label,
                                         std::span<const PlotSeries> series) {
  return write_plot(out_dir, name, x_label, y_label, series, /*lines=*/true);
}

std::vector<std::string> write_scatter_plot(const std::string& out_dir, const std::string& name,
                                            const std::string& x_label, const std::string& y_label,
                                            std::span<const PlotSeries> series) {
  return write_plot(out_dir, name, x_label, y_label, series, /*lines=*/false);
}

std::vector<std::string> emit_plots(std::span<const AttackReport> reports,
                                    const std::string& out_dir) {
  if (reports.empty()) return {};

  // All reports must share one k grid per curve family.
  std::vector<int> grid;
  for (const auto& rep : reports) {
    for (const auto& c : rep.curves) {
      std::vector<int> ks;
      for (const auto& p : c.points) ks.push_back(p.k);
      if (grid.empty()) {
        grid = ks;
      } else if (!ks.empty() && ks != grid) {
        throw std::invalid_argument("emit_plots: reports use different k grids");
      }
    }
  }

  std::vector<std::string> written;
  auto append = [&](std::vector<std::string> paths) {
    for (auto& p : paths) written.push_back(std::move(p));
  };

  // Collect curve identities (key label x uniques flag) across reports.
  std::vector<std::pair<std::string, bool>> kinds;
  for (const auto& rep : reports) {
    for (const auto& c : rep.curves) {
      std::pair<std::string, bool> kind{c.key_label, c.uniques_only};
      if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) kinds.push_back(kind);
    }
  }

  for (const auto& [label, uniq] : kinds) {
    for (const char* metric : {"precision", "recall", "match_rate"}) {
      std::vector<PlotSeries> series;
      for (const auto& rep : reports) {
        for (const auto& c : rep.curves) {
          if (c.key_label != label || c.uniques_only != uniq) continue;
          PlotSeries s;
          s.label = rep.scenario;
          for (const auto& p : c.points) {
            s.x.push_back(p.k);
            if (std::string(metric) == "precision") {
              s.y.push_back(p.precision);
            } else if (std::string(metric) == "recall") {
              s.y.push_back(p.recall);
            } else {
              s.y.push_back(p.match_rate);
            }
          }
          series.push_back(std::move(s));
        }
      }
      if (series.empty()) continue;
      std::string name = std::string(metric) + "_" + label + (uniq ? "_uniques" : "");
      append(write_line_plot(out_dir, name, "k", metric, series));
    }
  }

  // Solution-variability CDF per attribute set.
  std::vector<std::string> solvar_labels;
  for (const auto& rep : reports) {
    for (const auto& [label, values] : rep.solvar_normalized) {
      if (std::find(solvar_labels.begin(), solvar_labels.end(), label) == solvar_labels.end()) {
        solvar_labels.push_back(label);
      }
    }
  }
  for (const auto& label : solvar_labels) {
    std::vector<PlotSeries> series;
    for (const auto& rep : reports) {
      auto it = rep.solvar_normalized.find(label);
      if (it == rep.solvar_normalized.end() || it->second.empty()) continue;
      std::vector<double> sorted = it->second;
      std::sort(sorted.begin(), sorted.end());
      PlotSeries s;
      s.label = rep.scenario;
      for (size_t i = 0; i < sorted.size(); ++i) {
        s.x.push_back(sorted[i]);
        s.y.push_back(static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
      }
      series.push_back(std::move(s));
    }
    if (!series.empty()) {
      append(write_line_plot(out_dir, "solvar_cdf_" + label, "normalized solution variability",
                             "fraction of blocks", series));
    }
  }

  // Putative vs true violations per block.
  {
    std::vector<PlotSeries> series;
    for (const auto& rep : reports) {
      if (rep.violation_scatter.empty()) continue;
      PlotSeries s;
      s.label = rep.scenario;
      for (const auto& [t, p] : rep.violation_scatter) {
        s.x.push_back(static_cast<double>(t));
        s.y.push_back(static_cast<double>(p));
      }
      series.push_back(std::move(s));
    }
    if (!series.empty()) {
      append(write_scatter_plot(out_dir, "violations_scatter", "true violations in block",
                                "putative violations", series));
    }
  }
  return written;
}

}  // namespace blockrecon
