#pragma once

// Self-contained SVG figures. Every emitter is a pure function of its input:
// identical input gives byte-identical output.

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "steerlab/honesty_eval.hpp"
#include "steerlab/npstats.hpp"
#include "steerlab/steering.hpp"

namespace steerlab::viz {

struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
};

// Smallest near-square grid with rows * cols >= n (cols = ceil(sqrt(n))).
Grid squarest_grid(std::size_t n);

using Rgb = std::array<int, 3>;

// Blue-white-red scale over t in [-1, 1]; white at 0, and diverging(-t) is
// diverging(t) with red and blue swapped.
Rgb diverging(double t);
std::string hex(const Rgb& c);

std::string heatmap_svg(const steering::ConceptVector& vector, const std::string& title = "");

struct CiRow {
  std::string label;
  eval::EvalSummary summary;
};

// t-quantile(level, n-1) * std / sqrt(n)
double ci_half_width(const eval::EvalSummary& summary, double level = 0.95);

std::string ci_plot_svg(const std::vector<CiRow>& rows, double level = 0.95,
                        const std::string& title = "");

inline constexpr double kSignificance = 0.05;

std::string pmatrix_heatmap_svg(const stats::PairwiseMatrix& matrix, const std::string& title = "");

std::string xml_escape(const std::string& text);

}  // namespace steerlab::viz
