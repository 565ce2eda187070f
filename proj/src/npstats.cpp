#include "steerlab/npstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "steerlab/errors.hpp"

namespace steerlab::stats {

using nlohmann::json;

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

}  // namespace

// ---------------------------------------------------------------------------
// Special functions

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw input_error("normal_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  double val;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    val = q *
          (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
                67265.770927008700853) * r + 45921.953931549871457) * r +
              13731.693765509461125) * r + 1971.5909503065514427) * r +
            133.14166789178437745) * r + 3.387132872796366608) /
          (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
                39307.89580009271061) * r + 21213.794301586595867) * r +
              5394.1960214247511077) * r + 687.1870074920579083) * r +
            42.313330701600911252) * r + 1.0);
    return val;
  }
  double r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw input_error("gamma_q: shape must be positive");
  if (x <= 0.0) return 1.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, del = 1.0 / a, sum = del;
    for (int i = 0; i < 10000; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return 1.0 - sum * std::exp(log_prefactor);
  }
  // Modified Lentz continued fraction for Q.
  double b = x + 1.0 - a, c = 1.0 / kTiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(log_prefactor) * h;
}

double chi2_sf(double x, double df) {
  if (!(df > 0.0)) throw input_error("chi2_sf: df must be positive");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw input_error("student_t_cdf: df must be positive");
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw input_error("student_t_quantile: p must be in (0,1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, df);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Ranks and omnibus tests

std::size_t GroupedSamples::total() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

void GroupedSamples::validate(std::size_t min_groups) const {
  if (groups.size() < min_groups) {
    throw input_error("need at least " + std::to_string(min_groups) + " groups, got " +
                      std::to_string(groups.size()));
  }
  if (!labels.empty() && labels.size() != groups.size()) {
    throw input_error("group labels do not match group count");
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].empty()) throw input_error("group " + std::to_string(i) + " is empty");
    for (double v : groups[i])
      if (!std::isfinite(v)) throw input_error("group " + std::to_string(i) + " has a non-finite value");
  }
}

std::vector<double> rank_with_ties(std::span<const double> values) {
  if (values.empty()) throw input_error("rank_with_ties: no values");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

struct PooledRanks {
  std::vector<double> mean_rank;  // per group
  std::vector<std::size_t> sizes;
  double n = 0.0;
  double tie_sum = 0.0;  // sum over tie groups of t^3 - t
};

PooledRanks pooled_ranks(const GroupedSamples& samples) {
  std::vector<double> all;
  for (const auto& g : samples.groups) all.insert(all.end(), g.begin(), g.end());
  auto ranks = rank_with_ties(all);
  PooledRanks pr;
  pr.n = static_cast<double>(all.size());
  std::size_t offset = 0;
  for (const auto& g : samples.groups) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += ranks[offset + i];
    pr.mean_rank.push_back(s / static_cast<double>(g.size()));
    pr.sizes.push_back(g.size());
    offset += g.size();
  }
  std::vector<double> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    pr.tie_sum += t * t * t - t;
    i = j;
  }
  return pr;
}

}  // namespace

StatReport kruskal_wallis(const GroupedSamples& samples) {
  samples.validate(2);
  if (samples.total() < 3) throw input_error("kruskal_wallis needs at least 3 observations");
  const auto pr = pooled_ranks(samples);
  const double N = pr.n;
  const double k = static_cast<double>(samples.groups.size());
  StatReport r;
  r.test = "kruskal_wallis";
  r.df = k - 1.0;
  const double correction = 1.0 - pr.tie_sum / (N * N * N - N);
  if (correction <= 0.0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.degenerate = true;
    return r;
  }
  const double grand = 0.5 * (N + 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < pr.sizes.size(); ++i) {
    const double dev = pr.mean_rank[i] - grand;
    s += static_cast<double>(pr.sizes[i]) * dev * dev;
  }
  r.statistic = 12.0 / (N * (N + 1.0)) * s / correction;
  r.p_value = std::clamp(chi2_sf(r.statistic, k - 1.0), 0.0, 1.0);
  return r;
}

std::string to_string(Correction c) { return c == Correction::kNone ? "none" : "bonferroni"; }

Correction parse_correction(const std::string& s) {
  if (s == "none") return Correction::kNone;
  if (s == "bonferroni") return Correction::kBonferroni;
  throw input_error("unknown correction '" + s + "' (expected none|bonferroni)");
}

PairwiseMatrix dunn_posthoc(const GroupedSamples& samples, Correction correction) {
  samples.validate(2);
  const auto pr = pooled_ranks(samples);
  const std::size_t k = samples.groups.size();
  PairwiseMatrix m;
  m.labels = samples.labels;
  if (m.labels.empty())
    for (std::size_t i = 0; i < k; ++i) m.labels.push_back(std::to_string(i + 1));
  m.correction = correction;
  m.p.assign(k * k, 1.0);
  m.z.assign(k * k, 0.0);
  const double N = pr.n;
  const double variance = N * (N + 1.0) / 12.0 - pr.tie_sum / (12.0 * (N - 1.0));
  if (!(variance > 0.0)) {
    m.degenerate = true;
    return m;
  }
  const double comparisons = static_cast<double>(k * (k - 1) / 2);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double se = std::sqrt(variance * (1.0 / static_cast<double>(pr.sizes[i]) +
                                              1.0 / static_cast<double>(pr.sizes[j])));
      const double z = (pr.mean_rank[i] - pr.mean_rank[j]) / se;
      double p = std::min(1.0, 2.0 * normal_sf(std::fabs(z)));
      if (correction == Correction::kBonferroni) p = std::min(1.0, comparisons * p);
      m.p[i * k + j] = m.p[j * k + i] = p;
      m.z[i * k + j] = z;
      m.z[j * k + i] = -z;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Shapiro-Wilk (Royston 1995, AS R94)

namespace {

double poly(const double* cc, int nord, double x) {
  double ret = cc[0];
  if (nord > 1) {
    double p = x * cc[nord - 1];
    for (int j = nord - 2; j > 0; --j) p = (p + cc[j]) * x;
    ret += p;
  }
  return ret;
}

}  // namespace

StatReport shapiro_wilk(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 3) throw input_error("shapiro_wilk needs at least 3 samples");
  if (n > 5000) throw input_error("shapiro_wilk supports at most 5000 samples");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 1e-19)) throw degenerate_error("shapiro_wilk: all samples are identical");

  static const double g[2] = {-2.273, 0.459};
  static const double c1[6] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static const double c3[4] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static const double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static const double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static const double c6[3] = {-0.4803, -0.082676, 0.0030302};

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  std::vector<double> a(half + 1, 0.0);  // 1-based half coefficients
  if (n == 3) {
    a[1] = std::sqrt(0.5);
  } else {
    const double an25 = an + 0.25;
    std::vector<double> m(half + 1, 0.0);
    double summ2 = 0.0;
    for (std::size_t i = 1; i <= half; ++i) {
      m[i] = normal_quantile((static_cast<double>(i) - 0.375) / an25);
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(c1, 6, rsn) - m[1] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 3;
      const double a2 = -m[2] / ssumm2 + poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[2] = a2;
    } else {
      first = 2;
      fac = std::sqrt((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1));
    }
    a[1] = a1;
    for (std::size_t i = first; i <= half; ++i) a[i] = -m[i] / fac;
  }

  // Antisymmetric coefficient per order statistic.
  std::vector<double> coef(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = n - 1 - i;
    if (i == j) continue;
    const double sign = i < j ? -1.0 : 1.0;
    coef[i] = sign * a[1 + std::min(i, j)];
  }
  double sa = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sa += coef[i];
    sx += x[i] / range;
  }
  sa /= an;
  sx /= an;
  double ssa = 0.0, ssx = 0.0, sax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double asa = coef[i] - sa;
    const double xsx = x[i] / range - sx;
    ssa += asa * asa;
    ssx += xsx * xsx;
    sax += asa * xsx;
  }
  const double ssassx = std::sqrt(ssa * ssx);
  const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);

  StatReport r;
  r.test = "shapiro_wilk";
  r.statistic = 1.0 - w1;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;   // 6/pi
    constexpr double stqr = 1.04719755119660;  // pi/3
    r.p_value = std::clamp(pi6 * (std::asin(std::sqrt(r.statistic)) - stqr), 0.0, 1.0);
    return r;
  }
  double y = std::log(w1);
  const double lx = std::log(an);
  double mean, sd;
  if (n <= 11) {
    const double gamma = poly(g, 2, an);
    if (y >= gamma) {
      r.p_value = 1e-99;
      return r;
    }
    y = -std::log(gamma - y);
    mean = poly(c3, 4, an);
    sd = std::exp(poly(c4, 4, an));
  } else {
    mean = poly(c5, 4, lx);
    sd = std::exp(poly(c6, 3, lx));
  }
  r.p_value = std::clamp(normal_sf((y - mean) / sd), 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const StatReport& r) {
  json j{{"test", r.test},
         {"statistic", r.statistic},
         {"p_value", r.p_value},
         {"degenerate", r.degenerate}};
  j["df"] = r.df ? json(*r.df) : json(nullptr);
  return j;
}

StatReport stat_report_from_json(const json& j) {
  StatReport r;
  r.test = j.at("test").get<std::string>();
  r.statistic = j.at("statistic").get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.degenerate = j.value("degenerate", false);
  if (j.contains("df") && !j["df"].is_null()) r.df = j["df"].get<double>();
  return r;
}

json to_json(const PairwiseMatrix& m) {
  const std::size_t k = m.size();
  json p = json::array(), z = json::array();
  for (std::size_t i = 0; i < k; ++i) {
    json prow = json::array(), zrow = json::array();
    for (std::size_t j = 0; j < k; ++j) {
      prow.push_back(m.at(i, j));
      zrow.push_back(m.z_at(i, j));
    }
    p.push_back(std::move(prow));
    z.push_back(std::move(zrow));
  }
  return json{{"test", "dunn"},         {"correction", to_string(m.correction)},
              {"labels", m.labels},     {"p_matrix", std::move(p)},
              {"z_matrix", std::move(z)}, {"degenerate", m.degenerate}};
}

PairwiseMatrix pairwise_from_json(const json& j) {
  PairwiseMatrix m;
  m.labels = j.at("labels").get<std::vector<std::string>>();
  m.correction = parse_correction(j.at("correction").get<std::string>());
  m.degenerate = j.value("degenerate", false);
  const std::size_t k = m.labels.size();
  const auto& p = j.at("p_matrix");
  if (p.size() != k) throw input_error("p_matrix row count does not match labels");
  m.z.assign(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (p[i].size() != k) throw input_error("p_matrix is not square");
    for (std::size_t jj = 0; jj < k; ++jj) m.p.push_back(p[i][jj].get<double>());
  }
  if (j.contains("z_matrix")) {
    const auto& z = j["z_matrix"];
    for (std::size_t i = 0; i < k && i < z.size(); ++i)
      for (std::size_t jj = 0; jj < k && jj < z[i].size(); ++jj) m.z[i * k + jj] = z[i][jj].get<double>();
  }
  return m;
}

}  // namespace steerlab::stats
