#include "evabs/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace evabs::stats {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double normal_log_density(double x, double mean, double variance) {
  double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

// ---------------------------------------------------------------------------
// multinoulli

MultinoulliTable::MultinoulliTable(std::size_t arity, double alpha,
                                   std::vector<std::string> labels,
                                   std::map<Context, std::vector<double>> counts)
    : arity_(arity), alpha_(alpha), labels_(std::move(labels)), counts_(std::move(counts)) {
  if (alpha_ < 0.0) throw EstimationError("smoothing must be non-negative");
  if (labels_.empty()) throw EstimationError("empty label alphabet");
  for (const auto& [ctx, c] : counts_)
    if (ctx.size() != arity_ || c.size() != labels_.size())
      throw EstimationError("count table does not match arity/alphabet");
}

double MultinoulliTable::probability(const Context& context, std::size_t label) const {
  const double n_labels = static_cast<double>(labels_.size());
  auto it = counts_.find(context);
  if (it == counts_.end()) return 1.0 / n_labels;
  double total = 0.0;
  for (double c : it->second) total += c;
  double denom = total + alpha_ * n_labels;
  if (denom <= 0.0) return 1.0 / n_labels;
  return (it->second.at(label) + alpha_) / denom;
}

std::vector<double> MultinoulliTable::distribution(const Context& context) const {
  std::vector<double> out(labels_.size());
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = probability(context, l);
  return out;
}

MultinoulliTable multinoulli_fit(const std::vector<std::pair<Context, std::string>>& observations,
                                 double alpha, std::vector<std::string> labels) {
  if (observations.empty()) throw EstimationError("no observations for multinoulli estimate");
  if (alpha < 0.0) throw EstimationError("smoothing must be non-negative");
  const std::size_t arity = observations.front().first.size();
  if (labels.empty()) {
    std::set<std::string> seen;
    for (const auto& [ctx, l] : observations) seen.insert(l);
    labels.assign(seen.begin(), seen.end());
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;

  std::map<Context, std::vector<double>> counts;
  for (const auto& [ctx, l] : observations) {
    if (ctx.size() != arity) throw EstimationError("contexts of different arity");
    auto it = index.find(l);
    if (it == index.end()) throw EstimationError("label '" + l + "' not in alphabet");
    auto& row = counts[ctx];
    if (row.empty()) row.assign(labels.size(), 0.0);
    row[it->second] += 1.0;
  }
  return MultinoulliTable(arity, alpha, std::move(labels), std::move(counts));
}

// ---------------------------------------------------------------------------
// gaussian mixtures

double Gmm::log_density(double x) const {
  std::vector<double> terms;
  terms.reserve(components.size());
  for (const auto& c : components)
    terms.push_back(std::log(c.weight) + normal_log_density(x, c.mean, c.variance));
  return log_sum_exp(terms);
}

double Gmm::density(double x) const { return std::exp(log_density(x)); }

double Gmm::log_likelihood(std::span<const double> samples) const {
  double ll = 0.0;
  for (double x : samples) ll += log_density(x);
  return ll;
}

double variance_floor_for(std::span<const double> samples) {
  if (samples.size() < 2) return 1e-9;
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= static_cast<double>(samples.size());
  return std::max(1e-6 * var, 1e-9);
}

namespace {

std::vector<double> kmeanspp_centers(std::span<const double> samples, std::size_t k,
                                     std::mt19937_64& rng) {
  std::vector<double> centers;
  std::uniform_int_distribution<std::size_t> first(0, samples.size() - 1);
  centers.push_back(samples[first(rng)]);
  std::vector<double> d2(samples.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (samples[i] - c) * (samples[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // Every sample coincides with a center; pick uniformly.
      centers.push_back(samples[first(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t chosen = samples.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      acc += d2[i];
      if (acc >= target && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(samples[chosen]);
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

}  // namespace

GmmFit gmm_fit_em(std::span<const double> samples, std::size_t k, std::uint64_t seed,
                  const EmOptions& options) {
  if (k == 0) throw EstimationError("mixture needs at least one component");
  if (k > samples.size())
    throw EstimationError("cannot fit " + std::to_string(k) + " components to " +
                          std::to_string(samples.size()) + " samples");
  for (double x : samples)
    if (!std::isfinite(x)) throw EstimationError("non-finite sample");

  const std::size_t n = samples.size();
  const double floor = variance_floor_for(samples);
  GmmFit fit;
  fit.model.variance_floor = floor;

  // Initialization: a few Lloyd iterations from the seeded centers, then one component
  // per non-empty cluster.
  std::mt19937_64 rng(seed);
  std::vector<double> centers = kmeanspp_centers(samples, k, rng);
  std::vector<std::size_t> assignment(n, 0);
  auto assign = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (std::abs(samples[i] - centers[j]) < std::abs(samples[i] - centers[best])) best = j;
      assignment[i] = best;
    }
  };
  for (int round = 0; round < 10; ++round) {
    assign();
    std::vector<double> sum(k, 0.0), count(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[assignment[i]] += samples[i];
      count[assignment[i]] += 1.0;
    }
    for (std::size_t j = 0; j < k; ++j)
      if (count[j] > 0) centers[j] = sum[j] / count[j];
  }
  assign();
  std::vector<double> sum(k, 0.0), count(k, 0.0), sum_sq(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[assignment[i]] += samples[i];
    count[assignment[i]] += 1.0;
  }
  for (std::size_t j = 0; j < k; ++j)
    if (count[j] > 0) centers[j] = sum[j] / count[j];
  for (std::size_t i = 0; i < n; ++i) {
    double d = samples[i] - centers[assignment[i]];
    sum_sq[assignment[i]] += d * d;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (count[j] == 0.0) continue;
    fit.model.components.push_back({count[j] / static_cast<double>(n), centers[j],
                                    std::max(sum_sq[j] / count[j], floor)});
  }
  if (fit.model.components.size() < k)
    fit.warnings.push_back("empty cluster at initialization; " +
                           std::to_string(fit.model.components.size()) + " components kept");

  std::vector<double> log_terms;
  std::vector<double> resp;
  auto e_step = [&](std::vector<double>& r) {
    const std::size_t m = fit.model.components.size();
    r.assign(n * m, 0.0);
    double ll = 0.0;
    log_terms.resize(m);
    // log weight plus the Gaussian normalizer, once per component
    std::vector<double> offset(m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& c = fit.model.components[j];
      offset[j] = std::log(c.weight) - 0.5 * std::log(2.0 * std::numbers::pi * c.variance);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const auto& c = fit.model.components[j];
        double d = samples[i] - c.mean;
        log_terms[j] = offset[j] - 0.5 * d * d / c.variance;
      }
      if (m == 1) {
        ll += log_terms[0];
        r[i] = 1.0;
        continue;
      }
      double lse = log_sum_exp(log_terms);
      ll += lse;
      for (std::size_t j = 0; j < m; ++j) r[i * m + j] = std::exp(log_terms[j] - lse);
    }
    return ll;
  };

  double ll = e_step(resp);
  fit.log_likelihood_trace.push_back(ll);
  bool clamped_warned = false;
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    const std::size_t m = fit.model.components.size();
    std::vector<GaussianComponent> next;
    for (std::size_t j = 0; j < m; ++j) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * m + j];
        sx += resp[i * m + j] * samples[i];
      }
      if (nk < 1e-12) {
        fit.warnings.push_back("component collapsed to zero weight and was dropped");
        continue;
      }
      double mean = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        sv += resp[i * m + j] * (samples[i] - mean) * (samples[i] - mean);
      double var = sv / nk;
      if (var < floor) {
        if (!clamped_warned)
          fit.warnings.push_back("degenerate component; variance clamped to floor");
        clamped_warned = true;
        var = floor;
      }
      next.push_back({nk / static_cast<double>(n), mean, var});
    }
    // Renormalize weights after dropping components.
    double wsum = 0.0;
    for (const auto& c : next) wsum += c.weight;
    for (auto& c : next) c.weight /= wsum;
    fit.model.components = std::move(next);

    double next_ll = e_step(resp);
    fit.log_likelihood_trace.push_back(next_ll);
    fit.iterations = iter + 1;
    double gain = next_ll - ll;
    ll = next_ll;
    if (gain <= options.tolerance * std::max(1.0, std::abs(ll))) break;
  }
  std::sort(fit.model.components.begin(), fit.model.components.end(),
            [](const GaussianComponent& a, const GaussianComponent& b) { return a.mean < b.mean; });
  return fit;
}

BicSelection gmm_select_bic(std::span<const double> samples, std::size_t k_max,
                            std::uint64_t seed, const EmOptions& options) {
  if (k_max == 0) throw EstimationError("k_max must be at least 1");
  if (samples.empty()) throw EstimationError("no samples for mixture selection");
  std::set<double> distinct(samples.begin(), samples.end());
  const std::size_t upper = std::min({k_max, samples.size(), distinct.size()});
  const double log_n = std::log(static_cast<double>(samples.size()));

  BicSelection out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= upper; ++k) {
    GmmFit fit = gmm_fit_em(samples, k, seed + k, options);
    double ll = fit.log_likelihood();
    double bic = -2.0 * ll + static_cast<double>(fit.model.free_parameters()) * log_n;
    out.candidates.push_back({fit.model.components.size(), bic, ll});
    if (bic < best) {
      best = bic;
      out.model = std::move(fit.model);
      out.chosen = out.candidates.size() - 1;
    }
  }
  return out;
}

}  // namespace evabs::stats
