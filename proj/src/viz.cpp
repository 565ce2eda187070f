#include "steerlab/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "steerlab/errors.hpp"

namespace steerlab::viz {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string num(double v) { return fmt("%.2f", v); }

std::string header(double width, double height) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         num(width) + "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + " " +
         num(height) + "\">\n";
}

std::string text(double x, double y, const std::string& body, const std::string& extra = "") {
  return "  <text x=\"" + num(x) + "\" y=\"" + num(y) + "\"" + extra + ">" + xml_escape(body) +
         "</text>\n";
}

}  // namespace

std::string xml_escape(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

Grid squarest_grid(std::size_t n) {
  if (n == 0) return {0, 0};
  std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  while (cols * cols < n) ++cols;
  while (cols > 1 && (cols - 1) * (cols - 1) >= n) --cols;
  const std::size_t rows = (n + cols - 1) / cols;
  return {rows, cols};
}

Rgb diverging(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - std::fabs(t))));
  if (t >= 0.0) return {255, fade, fade};
  return {fade, fade, 255};
}

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

std::string heatmap_svg(const steering::ConceptVector& vector, const std::string& title) {
  const auto& v = vector.values;
  if (v.empty()) throw input_error("heatmap_svg: empty vector");
  const Grid grid = squarest_grid(v.size());
  double lo = v[0], hi = v[0], scale = 0.0;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    scale = std::max(scale, std::fabs(x));
  }
  const double cell = 24.0, margin = 40.0, legend = 70.0;
  const double width = margin * 2 + cell * static_cast<double>(grid.cols);
  const double height = margin * 2 + cell * static_cast<double>(grid.rows) + legend;
  const std::string name =
      title.empty() ? "concept vector (iteration " + std::to_string(vector.source_iteration) + ")"
                    : title;

  std::string s = header(width, height);
  s += "  <title>" + xml_escape(name) + "</title>\n";
  s += "  <rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" fill=\"#ffffff\"/>\n";
  s += text(margin, 24.0, name, " font-family=\"sans-serif\" font-size=\"13\"");
  s += "  <g class=\"cells\" stroke=\"#dddddd\" stroke-width=\"0.5\">\n";
  for (std::size_t i = 0; i < grid.rows * grid.cols; ++i) {
    const double x = margin + cell * static_cast<double>(i % grid.cols);
    const double y = margin + cell * static_cast<double>(i / grid.cols);
    std::string attrs = " x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) +
                        "\" height=\"" + num(cell) + "\"";
    if (i < v.size()) {
      const double t = scale > 0.0 ? v[i] / scale : 0.0;
      s += "    <rect class=\"cell\" data-index=\"" + std::to_string(i) + "\" data-value=\"" +
           fmt("%.6e", v[i]) + "\"" + attrs + " fill=\"" + hex(diverging(t)) + "\"/>\n";
    } else {
      s += "    <rect class=\"blank\"" + attrs + " fill=\"none\"/>\n";
    }
  }
  s += "  </g>\n";

  const double ly = margin + cell * static_cast<double>(grid.rows) + 20.0;
  const double lw = width - 2 * margin;
  s += "  <defs><linearGradient id=\"scale\" x1=\"0\" x2=\"1\" y1=\"0\" y2=\"0\">"
       "<stop offset=\"0\" stop-color=\"#0000ff\"/><stop offset=\"0.5\" stop-color=\"#ffffff\"/>"
       "<stop offset=\"1\" stop-color=\"#ff0000\"/></linearGradient></defs>\n";
  s += "  <rect class=\"legend\" x=\"" + num(margin) + "\" y=\"" + num(ly) + "\" width=\"" +
       num(lw) + "\" height=\"12\" fill=\"url(#scale)\" stroke=\"#888888\"/>\n";
  const std::string small = " font-family=\"sans-serif\" font-size=\"10\"";
  s += text(margin, ly + 26.0, "-" + fmt("%.4g", scale), small);
  s += text(margin + lw, ly + 26.0, fmt("%.4g", scale), small + " text-anchor=\"end\"");
  s += text(margin, ly + 42.0, "min " + fmt("%.6g", lo) + "  max " + fmt("%.6g", hi),
            " class=\"minmax\"" + small);
  s += "</svg>\n";
  return s;
}

double ci_half_width(const eval::EvalSummary& summary, double level) {
  if (summary.n < 2) throw input_error("confidence interval needs n >= 2");
  if (!(level > 0.0 && level < 1.0)) throw input_error("confidence level must be in (0,1)");
  const double t = stats::student_t_quantile(0.5 * (1.0 + level), static_cast<double>(summary.n - 1));
  return t * summary.std / std::sqrt(static_cast<double>(summary.n));
}

std::string ci_plot_svg(const std::vector<CiRow>& rows, double level, const std::string& title) {
  if (rows.empty()) throw input_error("ci_plot_svg: no rows");
  std::vector<double> half;
  double ymin = 0.0, ymax = 1.0;
  for (const auto& r : rows) {
    half.push_back(ci_half_width(r.summary, level));
    ymin = std::min(ymin, r.summary.mean - half.back());
    ymax = std::max(ymax, r.summary.mean + half.back());
  }
  const double left = 70.0, right = 20.0, top = 40.0, bottom = 60.0;
  const double step = 50.0, plot_h = 300.0;
  const double plot_w = step * static_cast<double>(rows.size());
  const double width = left + plot_w + right, height = top + plot_h + bottom;
  auto ypos = [&](double v) { return top + plot_h * (ymax - v) / (ymax - ymin); };
  const std::string name = title.empty() ? "evaluation score by intervention" : title;
  const std::string small = " font-family=\"sans-serif\" font-size=\"10\"";

  std::string s = header(width, height);
  s += "  <title>" + xml_escape(name) + "</title>\n";
  s += "  <rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" fill=\"#ffffff\"/>\n";
  s += text(left, 24.0, name + " (" + fmt("%.0f", level * 100.0) + "% CI)",
            " font-family=\"sans-serif\" font-size=\"13\"");
  s += "  <line class=\"axis\" x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) +
       "\" y2=\"" + num(top + plot_h) + "\" stroke=\"#000000\"/>\n";
  s += "  <line class=\"axis\" x1=\"" + num(left) + "\" y1=\"" + num(top + plot_h) + "\" x2=\"" +
       num(left + plot_w) + "\" y2=\"" + num(top + plot_h) + "\" stroke=\"#000000\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ymin + (ymax - ymin) * i / 4.0;
    s += text(left - 6.0, ypos(v) + 3.0, fmt("%.2f", v), small + " text-anchor=\"end\"");
  }
  s += text(left + plot_w / 2.0, height - 12.0, "intervention",
            " class=\"xlabel\" text-anchor=\"middle\"" + small);
  s += text(16.0, top + plot_h / 2.0, "mean evaluation score",
            " class=\"ylabel\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
                num(top + plot_h / 2.0) + ")\"" + small);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double x = left + step * (static_cast<double>(i) + 0.5);
    const double m = rows[i].summary.mean;
    s += "  <line class=\"errorbar\" data-halfwidth=\"" + fmt("%.6e", half[i]) + "\" x1=\"" +
         num(x) + "\" y1=\"" + num(ypos(m - half[i])) + "\" x2=\"" + num(x) + "\" y2=\"" +
         num(ypos(m + half[i])) + "\" stroke=\"#333333\"/>\n";
    s += "  <circle class=\"marker\" data-label=\"" + xml_escape(rows[i].label) +
         "\" data-mean=\"" + fmt("%.6e", m) + "\" cx=\"" + num(x) + "\" cy=\"" + num(ypos(m)) +
         "\" r=\"4\" fill=\"#1f77b4\"/>\n";
    s += text(x, top + plot_h + 16.0, rows[i].label, small + " text-anchor=\"middle\"");
  }
  s += "</svg>\n";
  return s;
}

namespace {

// Low p -> deep red, p = 1 -> pale yellow.
Rgb pvalue_color(double p) {
  const double t = std::clamp(p, 0.0, 1.0);
  auto mix = [t](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  return {mix(165, 255), mix(0, 255), mix(38, 204)};
}

}  // namespace

std::string pmatrix_heatmap_svg(const stats::PairwiseMatrix& matrix, const std::string& title) {
  const std::size_t k = matrix.size();
  if (k == 0 || matrix.p.size() != k * k) throw input_error("pmatrix_heatmap_svg: malformed matrix");
  const double cell = 56.0, left = 60.0, top = 60.0, legend = 50.0;
  const double width = left + cell * static_cast<double>(k) + 20.0;
  const double height = top + cell * static_cast<double>(k) + legend;
  const std::string name =
      title.empty() ? "dunn pairwise p-values (" + stats::to_string(matrix.correction) + ")"
                    : title;
  const std::string small = " font-family=\"sans-serif\" font-size=\"10\"";

  std::string s = header(width, height);
  s += "  <title>" + xml_escape(name) + "</title>\n";
  s += "  <style>.below-threshold{stroke:#000000;stroke-width:2;stroke-dasharray:4 2}</style>\n";
  s += "  <rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" fill=\"#ffffff\"/>\n";
  s += text(left, 24.0, name, " font-family=\"sans-serif\" font-size=\"13\"");
  for (std::size_t i = 0; i < k; ++i) {
    s += text(left + cell * (static_cast<double>(i) + 0.5), top - 8.0, matrix.labels[i],
              small + " text-anchor=\"middle\"");
    s += text(left - 8.0, top + cell * (static_cast<double>(i) + 0.5) + 3.0, matrix.labels[i],
              small + " text-anchor=\"end\"");
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double p = matrix.at(i, j);
      const double x = left + cell * static_cast<double>(j);
      const double y = top + cell * static_cast<double>(i);
      const bool below = p < kSignificance;
      s += "  <rect class=\"" + std::string(below ? "cell below-threshold" : "cell") +
           "\" data-row=\"" + std::to_string(i) + "\" data-col=\"" + std::to_string(j) +
           "\" x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cell) + "\" height=\"" +
           num(cell) + "\" fill=\"" + hex(pvalue_color(p)) + "\"/>\n";
      s += text(x + cell / 2.0, y + cell / 2.0 + 3.0, fmt("%.4f", p),
                " class=\"annotation\" text-anchor=\"middle\"" + small);
    }
  }
  const double ly = top + cell * static_cast<double>(k) + 18.0;
  s += "  <rect class=\"threshold-marker below-threshold\" x=\"" + num(left) + "\" y=\"" + num(ly) +
       "\" width=\"14\" height=\"14\" fill=\"" + hex(pvalue_color(0.0)) + "\"/>\n";
  s += text(left + 20.0, ly + 11.0, "p < " + fmt("%.2f", kSignificance), small);
  s += "</svg>\n";
  return s;
}

}  // namespace steerlab::viz
