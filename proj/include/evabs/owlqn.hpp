#pragma once

// Orthant-wise limited-memory quasi-Newton minimization of
//   smooth(x) + c * |x|_1
// With c == 0 this is plain L-BFGS with backtracking line search.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "evabs/error.hpp"

namespace evabs::owlqn {

/// Returns the smooth part's value and writes its gradient into `gradient`.
using Objective = std::function<double(std::span<const double> x, std::span<double> gradient)>;

struct OwlqnConfig {
  std::size_t memory = 10;
  double l1 = 0.0;
  std::size_t max_iterations = 500;
  // Stop when the composite objective's relative decrease, averaged over the last
  // `past` iterations, falls below this.
  double tolerance = 1e-7;
  std::size_t past = 5;
  // Stop when the pseudo-gradient norm falls below gradient_tolerance * max(1, |x|).
  double gradient_tolerance = 1e-10;
  double sufficient_decrease = 1e-4;
  double backtrack = 0.5;
  std::size_t max_line_search = 50;

  void check() const;
};

enum class Status { converged, gradient_converged, max_iterations, line_search_failed };

std::string to_string(Status s);

struct Result {
  std::vector<double> x;
  double value = 0.0;        // composite objective at x
  double smooth_value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  Status status = Status::converged;
  std::vector<double> history;  // composite objective after each accepted step (index 0 = start)
};

/// Throws OptimizationError if the objective or gradient is non-finite; the message names
/// the iteration.
Result minimize(const Objective& objective, std::span<const double> initial,
                const OwlqnConfig& config = {});

/// Pseudo-gradient of smooth + c|x|_1 (minimum-norm subgradient at zero coordinates).
void pseudo_gradient(std::span<const double> x, std::span<const double> gradient, double l1,
                     std::span<double> out);

}  // namespace evabs::owlqn
