#include "evabs/owlqn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

namespace evabs::owlqn {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double l1_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

struct Correction {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

}  // namespace

void OwlqnConfig::check() const {
  if (memory < 1) throw ConfigError("OWL-QN memory must be at least 1");
  if (l1 < 0.0) throw ConfigError("L1 coefficient must be non-negative");
  if (!(tolerance > 0.0) || !(gradient_tolerance > 0.0))
    throw ConfigError("OWL-QN tolerances must be positive");
  if (!(sufficient_decrease > 0.0 && sufficient_decrease < 1.0))
    throw ConfigError("sufficient decrease constant must be in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("backtracking factor must be in (0, 1)");
  if (max_line_search == 0) throw ConfigError("line search needs at least one trial");
}

std::string to_string(Status s) {
  switch (s) {
    case Status::converged: return "converged";
    case Status::gradient_converged: return "gradient_converged";
    case Status::max_iterations: return "max_iterations";
    case Status::line_search_failed: return "line_search_failed";
  }
  return "?";
}

void pseudo_gradient(std::span<const double> x, std::span<const double> g, double l1,
                     std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (l1 == 0.0) {
      out[i] = g[i];
    } else if (x[i] > 0.0) {
      out[i] = g[i] + l1;
    } else if (x[i] < 0.0) {
      out[i] = g[i] - l1;
    } else if (g[i] + l1 < 0.0) {
      out[i] = g[i] + l1;
    } else if (g[i] - l1 > 0.0) {
      out[i] = g[i] - l1;
    } else {
      out[i] = 0.0;
    }
  }
}

Result minimize(const Objective& objective, std::span<const double> initial,
                const OwlqnConfig& config) {
  config.check();
  const std::size_t n = initial.size();
  const double c = config.l1;

  Result result;
  std::vector<double> x(initial.begin(), initial.end());
  std::vector<double> g(n), pg(n), d(n), x_new(n), g_new(n), orthant(n);

  auto evaluate = [&](std::span<const double> at, std::span<double> grad, std::size_t iter) {
    double f = objective(at, grad);
    ++result.evaluations;
    if (!std::isfinite(f) || !all_finite(grad) || !all_finite(at)) {
      std::ostringstream msg;
      msg << "non-finite objective or gradient at iteration " << iter << ", iterate [";
      for (std::size_t i = 0; i < std::min<std::size_t>(at.size(), 8); ++i)
        msg << (i ? ", " : "") << at[i];
      if (at.size() > 8) msg << ", ...";
      msg << "]";
      throw OptimizationError(msg.str());
    }
    return f;
  };

  double f = evaluate(x, g, 0);
  double F = f + c * l1_norm(x);
  result.history.push_back(F);
  pseudo_gradient(x, g, c, pg);

  std::deque<Correction> memory;
  result.status = Status::max_iterations;

  auto gradient_small = [&]() {
    return norm(pg) <= config.gradient_tolerance * std::max(1.0, norm(x));
  };

  if (gradient_small()) {
    result.status = Status::gradient_converged;
  } else {
    for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
      // Two-loop recursion on the pseudo-gradient.
      for (std::size_t i = 0; i < n; ++i) d[i] = -pg[i];
      std::vector<double> alpha(memory.size());
      for (std::size_t j = memory.size(); j-- > 0;) {
        alpha[j] = memory[j].rho * dot(memory[j].s, d);
        for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[j] * memory[j].y[i];
      }
      if (!memory.empty()) {
        const auto& last = memory.back();
        double gamma = dot(last.s, last.y) / dot(last.y, last.y);
        for (double& v : d) v *= gamma;
      }
      for (std::size_t j = 0; j < memory.size(); ++j) {
        double beta = memory[j].rho * dot(memory[j].y, d);
        for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[j] - beta) * memory[j].s[i];
      }
      // Keep only components agreeing with steepest descent.
      if (c > 0.0)
        for (std::size_t i = 0; i < n; ++i)
          if (sign(d[i]) != sign(-pg[i])) d[i] = 0.0;
      if (dot(d, pg) >= 0.0) {
        memory.clear();
        for (std::size_t i = 0; i < n; ++i) d[i] = -pg[i];
      }

      // Orthant of the new iterate.
      for (std::size_t i = 0; i < n; ++i) orthant[i] = x[i] != 0.0 ? sign(x[i]) : sign(-pg[i]);

      double step = memory.empty() ? 1.0 / std::max(norm(d), 1e-300) : 1.0;
      if (memory.empty() && iter > 1) step = std::min(1.0, step);
      bool accepted = false;
      double f_new = 0.0, F_new = 0.0;
      for (std::size_t trial = 0; trial < config.max_line_search; ++trial) {
        for (std::size_t i = 0; i < n; ++i) {
          x_new[i] = x[i] + step * d[i];
          if (c > 0.0 && sign(x_new[i]) != orthant[i]) x_new[i] = 0.0;
        }
        f_new = evaluate(x_new, g_new, iter);
        F_new = f_new + c * l1_norm(x_new);
        double decrease = 0.0;
        for (std::size_t i = 0; i < n; ++i) decrease += pg[i] * (x_new[i] - x[i]);
        if (F_new <= F + config.sufficient_decrease * decrease) {
          accepted = true;
          break;
        }
        step *= config.backtrack;
      }
      if (!accepted) {
        result.status = Status::line_search_failed;
        break;
      }

      Correction corr{std::vector<double>(n), std::vector<double>(n), 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        corr.s[i] = x_new[i] - x[i];
        corr.y[i] = g_new[i] - g[i];
      }
      double sy = dot(corr.s, corr.y);
      if (sy > 1e-12 * dot(corr.y, corr.y) && sy > 0.0) {
        corr.rho = 1.0 / sy;
        memory.push_back(std::move(corr));
        if (memory.size() > config.memory) memory.pop_front();
      }

      x.swap(x_new);
      g.swap(g_new);
      f = f_new;
      F = F_new;
      pseudo_gradient(x, g, c, pg);
      result.history.push_back(F);
      result.iterations = iter;

      if (gradient_small()) {
        result.status = Status::gradient_converged;
        break;
      }
      if (result.history.size() > config.past) {
        double before = result.history[result.history.size() - 1 - config.past];
        double rate = (before - F) / static_cast<double>(config.past) / std::max(std::abs(F), 1e-300);
        if (rate < config.tolerance) {
          result.status = Status::converged;
          break;
        }
      }
    }
  }

  result.x = std::move(x);
  result.value = F;
  result.smooth_value = f;
  return result;
}

}  // namespace evabs::owlqn
