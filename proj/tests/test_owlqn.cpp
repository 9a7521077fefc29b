#include <doctest.h>

#include <cmath>
#include <random>

#include "evabs/owlqn.hpp"

using namespace evabs;
using namespace evabs::owlqn;

namespace {

Objective half_distance(const std::vector<double>& b) {
  return [b](std::span<const double> x, std::span<double> g) {
    double f = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      g[i] = x[i] - b[i];
      f += 0.5 * g[i] * g[i];
    }
    return f;
  };
}

double soft_threshold(double b, double c) {
  return (b > 0 ? 1.0 : b < 0 ? -1.0 : 0.0) * std::max(std::abs(b) - c, 0.0);
}

// Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    std::swap(a[k], a[p]);
    std::swap(b[k], b[p]);
    for (std::size_t i = k + 1; i < n; ++i) {
      double m = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= m * a[k][j];
      b[i] -= m * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

}  // namespace

TEST_CASE("soft-threshold solutions") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nb(0.0, 2.0);
  std::uniform_real_distribution<double> nc(0.0, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> b(8);
    for (auto& v : b) v = nb(rng);
    OwlqnConfig cfg;
    cfg.l1 = nc(rng);
    auto r = minimize(half_distance(b), std::vector<double>(b.size(), 0.0), cfg);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(r.x[i] - soft_threshold(b[i], cfg.l1)) <= 1e-6);
  }
}

TEST_CASE("without L1 a quadratic matches the linear solve") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + trial % 4;
    std::vector<std::vector<double>> m(d, std::vector<double>(d)), a(d, std::vector<double>(d, 0.0));
    for (auto& row : m)
      for (auto& v : row) v = n(rng);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < d; ++k) a[i][j] += m[k][i] * m[k][j];
        if (i == j) a[i][j] += 0.5;
      }
    std::vector<double> b(d);
    for (auto& v : b) v = n(rng);
    auto f = [&](std::span<const double> x, std::span<double> g) {
      double val = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double ax = 0.0;
        for (std::size_t j = 0; j < d; ++j) ax += a[i][j] * x[j];
        g[i] = ax - b[i];
        val += 0.5 * x[i] * ax - b[i] * x[i];
      }
      return val;
    };
    auto r = minimize(f, std::vector<double>(d, 0.0));
    auto x = solve(a, b);
    for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(r.x[i] - x[i]) <= 1e-6);
  }
}

TEST_CASE("a dominating penalty returns zero") {
  OwlqnConfig cfg;
  cfg.l1 = 1e6;
  auto r = minimize(half_distance({3.0, -4.0, 0.5}), std::vector<double>{1.0, 1.0, 1.0}, cfg);
  for (double v : r.x) CHECK(v == 0.0);
}

TEST_CASE("composite objective never increases and never exceeds the start") {
  std::vector<double> b{2.0, -1.0, 0.3, 5.0};
  OwlqnConfig cfg;
  cfg.l1 = 0.4;
  std::vector<double> start{-3.0, 4.0, 2.0, 0.0};
  auto r = minimize(half_distance(b), start, cfg);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
  CHECK(r.value <= r.history.front());
}

TEST_CASE("zero count grows with the penalty on the soft-threshold family") {
  std::vector<double> b{0.1, -0.3, 0.5, -0.7, 0.9, 1.1, -1.3, 1.5};
  std::size_t prev = 0;
  for (double c : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 2.0}) {
    OwlqnConfig cfg;
    cfg.l1 = c;
    auto r = minimize(half_distance(b), std::vector<double>(b.size(), 0.0), cfg);
    std::size_t zeros = std::count(r.x.begin(), r.x.end(), 0.0);
    CHECK(zeros >= prev);
    prev = zeros;
  }
  CHECK(prev == b.size());
}

TEST_CASE("identical inputs give identical iterates") {
  std::vector<double> b{1.0, -2.0, 0.25};
  OwlqnConfig cfg;
  cfg.l1 = 0.3;
  auto a = minimize(half_distance(b), std::vector<double>{0.5, 0.5, 0.5}, cfg);
  auto c = minimize(half_distance(b), std::vector<double>{0.5, 0.5, 0.5}, cfg);
  CHECK(a.x == c.x);
  CHECK(a.history == c.history);
}

TEST_CASE("non-finite objective is an optimization error naming the iteration") {
  auto f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 1.0;
    return x[0] < -0.5 ? std::nan("") : x[0];
  };
  try {
    minimize(f, std::vector<double>{0.0});
    FAIL("expected an optimization error");
  } catch (const OptimizationError& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("configuration is checked") {
  OwlqnConfig cfg;
  cfg.memory = 0;
  CHECK_THROWS_AS(minimize(half_distance({1.0}), std::vector<double>{0.0}, cfg), ConfigError);
  cfg = {};
  cfg.l1 = -1;
  CHECK_THROWS_AS(minimize(half_distance({1.0}), std::vector<double>{0.0}, cfg), ConfigError);
}

TEST_CASE("pseudo-gradient picks the minimum-norm subgradient at zero") {
  std::vector<double> x{0.0, 0.0, 0.0, 1.0, -1.0}, g{0.5, 2.0, -2.0, 0.5, 0.5}, out(5);
  pseudo_gradient(x, g, 1.0, out);
  CHECK(out == std::vector<double>{0.0, 1.0, -1.0, 1.5, -0.5});
}
