#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "steerlab/autodiff.hpp"
#include "steerlab/model.hpp"

namespace testing {

inline std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Largest relative error between analytic gradients of `leaves` (after one
// backward of f()) and central differences with step eps.
inline double max_grad_error(const std::function<steerlab::ad::Tensor()>& f,
                             std::vector<steerlab::ad::Tensor> leaves, double eps = 1e-5,
                             double floor = 1e-6) {
  for (auto& l : leaves) l.zero_grad();
  steerlab::ad::backward(f());
  double worst = 0.0;
  for (auto& l : leaves) {
    const std::vector<double> analytic(l.grad().begin(), l.grad().end());
    auto w = l.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      w[i] = keep + eps;
      const double up = f().item();
      w[i] = keep - eps;
      const double down = f().item();
      w[i] = keep;
      worst = std::max(worst, rel_err(analytic[i], (up - down) / (2 * eps), floor));
    }
  }
  return worst;
}

// Same comparison against the fourth-order central stencil
// (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h.
inline double max_grad_error_5pt(const std::function<steerlab::ad::Tensor()>& f,
                                 std::vector<steerlab::ad::Tensor> leaves, double h = 1e-3,
                                 double floor = 1e-6) {
  for (auto& l : leaves) l.zero_grad();
  steerlab::ad::backward(f());
  double worst = 0.0;
  for (auto& l : leaves) {
    const std::vector<double> analytic(l.grad().begin(), l.grad().end());
    auto w = l.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double keep = w[i];
      auto at = [&](double step) {
        w[i] = keep + step;
        return f().item();
      };
      const double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      w[i] = keep;
      worst = std::max(worst, rel_err(analytic[i], fd, floor));
    }
  }
  return worst;
}

inline std::vector<double> copy_values(const steerlab::ad::Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

inline steerlab::TokenBatch tokens(std::size_t b, std::size_t t, std::vector<int> ids) {
  return {b, t, std::move(ids)};
}

inline steerlab::TokenBatch random_tokens(std::size_t b, std::size_t t, std::size_t vocab,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  steerlab::TokenBatch out{b, t, std::vector<int>(b * t)};
  for (auto& x : out.ids) x = static_cast<int>(rng() % vocab);
  return out;
}

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("steerlab_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
