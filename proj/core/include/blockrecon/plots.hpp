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

#ifndef BLOCKRECON_PLOTS_HPP_
#define BLOCKRECON_PLOTS_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blockrecon/reident.hpp"

namespace blockrecon {

// One polyline per scenario; null points render as gaps.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<std::optional<double>> y;
};

// Minimal deterministic SVG line plot with a sidecar CSV holding the same
// numbers. Returns the paths written (svg, csv).
std::vector<std::string> write_line_plot(const std::string& out_dir, const std::string& name,
                                         const std::string& x_label, const std::string& y_label,
                                         std::span<const PlotSeries> series);

// Scatter variant (points only).
std::vector<std::string> write_scatter_plot(const std::string& out_dir, const std::string& name,
                                            const std::string& x_label, const std::string& y_label,
                                            std::span<const PlotSeries> series);

// Curve figures (precision@k, recall@k, match rate@k per match key), the
// solution-variability cumulative distributions, and the putative-vs-true
// violation scatter for every report. Reports must share the same k grid.
std::vector<std::string> emit_plots(std::span<const AttackReport> reports,
                                    const std::string& out_dir);

}  // namespace blockrecon

#endif  // BLOCKRECON_PLOTS_HPP_
