#pragma once

// Rank-based tests and the special functions behind their p-values.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace steerlab::stats {

// ---- special functions ----------------------------------------------------

double normal_cdf(double z);
double normal_sf(double z);
// Inverse standard normal CDF (Wichura AS241, ~1e-16 relative accuracy).
double normal_quantile(double p);
// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);
double chi2_sf(double x, double df);
// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

// ---- tests ------------------------------------------------------------------

struct StatReport {
  std::string test;
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> df;
  bool degenerate = false;
};

struct GroupedSamples {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> groups;

  std::size_t total() const;
  // At least min_groups groups, all non-empty, labels aligned.
  void validate(std::size_t min_groups) const;
};

// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> rank_with_ties(std::span<const double> values);

// H with tie correction; p from chi-square with k-1 df. All-tied data gives
// H = 0, p = 1 and degenerate = true.
StatReport kruskal_wallis(const GroupedSamples& samples);

enum class Correction { kNone, kBonferroni };
std::string to_string(Correction c);
Correction parse_correction(const std::string& s);

struct PairwiseMatrix {
  std::vector<std::string> labels;
  std::vector<double> p;  // k x k row-major
  std::vector<double> z;  // signed Dunn z, row minus column; zero diagonal
  Correction correction = Correction::kNone;
  bool degenerate = false;

  std::size_t size() const { return labels.size(); }
  double at(std::size_t i, std::size_t j) const { return p[i * size() + j]; }
  double z_at(std::size_t i, std::size_t j) const { return z[i * size() + j]; }
};

// Dunn's pairwise test on pooled ranks with tie-corrected variance; two-sided
// p. Bonferroni multiplies by k(k-1)/2 and clamps at 1.
PairwiseMatrix dunn_posthoc(const GroupedSamples& samples, Correction correction);

// Royston's AS R94 W and p-value. 3 <= n <= 5000.
StatReport shapiro_wilk(std::span<const double> samples);

// ---- serialization ----------------------------------------------------------

nlohmann::json to_json(const StatReport& r);
StatReport stat_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PairwiseMatrix& m);
PairwiseMatrix pairwise_from_json(const nlohmann::json& j);

}  // namespace steerlab::stats
