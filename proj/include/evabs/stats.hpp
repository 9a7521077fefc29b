#pragma once

// Smoothed multinoulli tables and univariate Gaussian mixtures (EM + BIC).

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evabs/error.hpp"

namespace evabs::stats {

using Context = std::vector<std::string>;

/// Categorical distribution over a fixed label alphabet, per context tuple:
///   P(l | ctx) = (count(ctx, l) + alpha) / (count(ctx) + alpha * |labels|)
/// Unseen contexts get the uniform distribution.
class MultinoulliTable {
 public:
  MultinoulliTable() = default;
  MultinoulliTable(std::size_t arity, double alpha, std::vector<std::string> labels,
                   std::map<Context, std::vector<double>> counts);

  std::size_t arity() const noexcept { return arity_; }
  double alpha() const noexcept { return alpha_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::map<Context, std::vector<double>>& counts() const noexcept { return counts_; }

  double probability(const Context& context, std::size_t label) const;
  /// Probabilities of all labels in alphabet order.
  std::vector<double> distribution(const Context& context) const;

  bool operator==(const MultinoulliTable&) const = default;

 private:
  std::size_t arity_ = 0;
  double alpha_ = 1.0;
  std::vector<std::string> labels_;
  std::map<Context, std::vector<double>> counts_;
};

/// Observations are (context, label) pairs. When `labels` is empty the alphabet is the sorted
/// set of observed labels. Throws EstimationError on empty input, mixed arity, negative alpha
/// or a label outside a supplied alphabet.
MultinoulliTable multinoulli_fit(const std::vector<std::pair<Context, std::string>>& observations,
                                 double alpha = 1.0, std::vector<std::string> labels = {});

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double variance = 1.0;

  bool operator==(const GaussianComponent&) const = default;
};

struct Gmm {
  std::vector<GaussianComponent> components;
  double variance_floor = 1e-9;

  double density(double x) const;
  double log_density(double x) const;
  double log_likelihood(std::span<const double> samples) const;
  /// 3k - 1 for k univariate components.
  std::size_t free_parameters() const noexcept { return 3 * components.size() - 1; }

  bool operator==(const Gmm&) const = default;
};

struct EmOptions {
  std::size_t max_iterations = 200;
  double tolerance = 1e-8;  // on relative log-likelihood gain
};

struct GmmFit {
  Gmm model;
  std::vector<double> log_likelihood_trace;  // after initialization and each EM iteration
  std::size_t iterations = 0;
  std::vector<std::string> warnings;

  double log_likelihood() const { return log_likelihood_trace.back(); }
};

/// max(1e-6 * sample variance, 1e-9).
double variance_floor_for(std::span<const double> samples);

/// k-means++ seeding (deterministic per seed) followed by EM. Throws EstimationError when
/// k == 0 or k > |samples|.
GmmFit gmm_fit_em(std::span<const double> samples, std::size_t k, std::uint64_t seed,
                  const EmOptions& options = {});

struct BicCandidate {
  std::size_t k = 0;
  double bic = 0.0;
  double log_likelihood = 0.0;
};

struct BicSelection {
  Gmm model;
  std::vector<BicCandidate> candidates;
  std::size_t chosen = 0;  // index into candidates
};

/// BIC = -2 log L + (3k - 1) ln n, minimized over k = 1..min(k_max, n, distinct values).
BicSelection gmm_select_bic(std::span<const double> samples, std::size_t k_max,
                            std::uint64_t seed, const EmOptions& options = {});

double normal_log_density(double x, double mean, double variance);
double log_sum_exp(std::span<const double> values);

}  // namespace evabs::stats
