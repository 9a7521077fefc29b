#include "evabs/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "evabs/stats.hpp"

namespace evabs::crf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kBlockSize = 16;

// alpha[t][l]: log-sum of scores of prefixes ending in l at t (including node t).
std::vector<double> forward(const Potentials& p) {
  const std::size_t T = p.positions, L = p.labels;
  std::vector<double> alpha(T * L, kNegInf);
  if (T == 0) return alpha;
  for (std::size_t l = 0; l < L; ++l) alpha[l] = p.trans(L, l) + p.at(0, l);
  std::vector<double> terms(L);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < L; ++k) terms[k] = alpha[(t - 1) * L + k] + p.trans(k, l);
      alpha[t * L + l] = stats::log_sum_exp(terms) + p.at(t, l);
    }
  }
  return alpha;
}

// beta[t][l]: log-sum of scores of suffixes after t given y_t = l (excluding node t).
std::vector<double> backward(const Potentials& p) {
  const std::size_t T = p.positions, L = p.labels;
  std::vector<double> beta(T * L, 0.0);
  if (T == 0) return beta;
  std::vector<double> terms(L);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < L; ++k)
        terms[k] = p.trans(l, k) + p.at(t + 1, k) + beta[(t + 1) * L + k];
      beta[t * L + l] = stats::log_sum_exp(terms);
    }
  }
  return beta;
}

void check_labels(std::span<const std::size_t> labels, std::size_t positions, std::size_t L) {
  if (labels.size() != positions)
    throw ValidationError("label sequence length " + std::to_string(labels.size()) +
                          " does not match " + std::to_string(positions) + " observations");
  for (auto l : labels)
    if (l >= L) throw ValidationError("label index " + std::to_string(l) + " outside alphabet");
}

// Forward-backward in linear space with per-position normalization. Needs T*L + (L+1)*L
// exponentials instead of O(T*L^2). Returns false when a scale factor underflows or
// overflows; the caller then falls back to the log-space recursions.
bool scaled_marginals(const Potentials& p, Marginals& m) {
  const std::size_t T = p.positions, L = p.labels;
  double trans_max = *std::max_element(p.transition.begin(), p.transition.end());
  std::vector<double> trans(p.transition.size()), node(T * L), scale(T);
  for (std::size_t i = 0; i < trans.size(); ++i) trans[i] = std::exp(p.transition[i] - trans_max);
  double log_z = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double mx = *std::max_element(p.node.begin() + t * L, p.node.begin() + (t + 1) * L);
    for (std::size_t l = 0; l < L; ++l) node[t * L + l] = std::exp(p.node[t * L + l] - mx);
    log_z += mx + trans_max;
  }
  std::vector<double> alpha(T * L), beta(T * L, 1.0);
  for (std::size_t t = 0; t < T; ++t) {
    double c = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      double a = 0.0;
      if (t == 0) {
        a = trans[L * L + l];
      } else {
        for (std::size_t k = 0; k < L; ++k) a += alpha[(t - 1) * L + k] * trans[k * L + l];
      }
      alpha[t * L + l] = a * node[t * L + l];
      c += alpha[t * L + l];
    }
    if (!(c > 1e-300) || !std::isfinite(c)) return false;
    for (std::size_t l = 0; l < L; ++l) alpha[t * L + l] /= c;
    scale[t] = c;
    log_z += std::log(c);
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t k = 0; k < L; ++k) {
      double b = 0.0;
      for (std::size_t l = 0; l < L; ++l) b += trans[k * L + l] * node[(t + 1) * L + l] * beta[(t + 1) * L + l];
      beta[t * L + k] = b / scale[t + 1];
    }
  }
  m.positions = T;
  m.labels = L;
  m.log_z = log_z;
  m.node.resize(T * L);
  for (std::size_t i = 0; i < T * L; ++i) m.node[i] = alpha[i] * beta[i];
  m.edge.resize((T - 1) * L * L);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b)
        m.edge[((t - 1) * L + a) * L + b] =
            alpha[(t - 1) * L + a] * trans[a * L + b] * node[t * L + b] * beta[t * L + b] / scale[t];
  return std::isfinite(log_z);
}

// Adds E[F] - F(observed) of one pair to `gradient` and returns -log p(y|x).
double accumulate_pair(const ChainLayout& layout, std::span<const double> weights,
                       const TrainingPair& pair, std::span<double> gradient) {
  const auto& obs = pair.observations;
  const std::size_t T = obs.positions, L = layout.labels, F = layout.families;
  check_labels(pair.labels, T, L);
  if (T == 0) return 0.0;
  Potentials p = make_potentials(layout, weights, obs);
  Marginals m;
  if (!scaled_marginals(p, m)) m = posterior_marginals(p);
  double score = sequence_score(p, pair.labels);

  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      double coef = m.at(t, l) - (pair.labels[t] == l ? 1.0 : 0.0);
      if (coef == 0.0) continue;
      for (std::size_t f = 0; f < F; ++f) gradient[layout.observation_index(f, l)] += coef * obs.at(t, f, l);
      gradient[layout.bias_index(l)] += coef;
    }
  }
  for (std::size_t l = 0; l < L; ++l)
    gradient[layout.transition_index(L, l)] += m.at(0, l) - (pair.labels[0] == l ? 1.0 : 0.0);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b) gradient[layout.transition_index(a, b)] += m.pair(t, a, b);
    gradient[layout.transition_index(pair.labels[t - 1], pair.labels[t])] -= 1.0;
  }
  return m.log_z - score;
}

}  // namespace

Potentials make_potentials(const ChainLayout& layout, std::span<const double> weights,
                           const ObservationMatrix& observations) {
  const std::size_t L = layout.labels, F = layout.families;
  if (weights.size() != layout.size())
    throw ValidationError("weight vector has " + std::to_string(weights.size()) +
                          " entries, layout needs " + std::to_string(layout.size()));
  if (observations.labels != L || observations.families != F)
    throw ValidationError("observation matrix does not match the feature layout");
  Potentials p;
  p.positions = observations.positions;
  p.labels = L;
  p.node.assign(p.positions * L, 0.0);
  p.transition.assign((L + 1) * L, 0.0);
  for (std::size_t t = 0; t < p.positions; ++t) {
    for (std::size_t l = 0; l < L; ++l) {
      double s = weights[layout.bias_index(l)];
      for (std::size_t f = 0; f < F; ++f)
        s += weights[layout.observation_index(f, l)] * observations.at(t, f, l);
      p.node[t * L + l] = s;
    }
  }
  for (std::size_t prev = 0; prev <= L; ++prev)
    for (std::size_t l = 0; l < L; ++l)
      p.transition[prev * L + l] = weights[layout.transition_index(prev, l)];
  return p;
}

double sequence_score(const Potentials& p, std::span<const std::size_t> labels) {
  check_labels(labels, p.positions, p.labels);
  double s = 0.0;
  std::size_t prev = p.labels;
  for (std::size_t t = 0; t < p.positions; ++t) {
    s += p.trans(prev, labels[t]) + p.at(t, labels[t]);
    prev = labels[t];
  }
  return s;
}

double log_partition(const Potentials& p) {
  if (p.positions == 0) return 0.0;
  auto alpha = forward(p);
  return stats::log_sum_exp(
      std::span<const double>(alpha).subspan((p.positions - 1) * p.labels, p.labels));
}

double log_partition_backward(const Potentials& p) {
  if (p.positions == 0) return 0.0;
  auto beta = backward(p);
  std::vector<double> terms(p.labels);
  for (std::size_t l = 0; l < p.labels; ++l) terms[l] = p.trans(p.labels, l) + p.at(0, l) + beta[l];
  return stats::log_sum_exp(terms);
}

Marginals posterior_marginals(const Potentials& p) {
  const std::size_t T = p.positions, L = p.labels;
  Marginals m;
  m.positions = T;
  m.labels = L;
  if (T == 0) return m;
  auto alpha = forward(p);
  auto beta = backward(p);
  m.log_z = stats::log_sum_exp(std::span<const double>(alpha).subspan((T - 1) * L, L));
  m.node.resize(T * L);
  for (std::size_t i = 0; i < T * L; ++i) m.node[i] = std::exp(alpha[i] + beta[i] - m.log_z);
  m.edge.resize((T > 0 ? T - 1 : 0) * L * L);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b)
        m.edge[((t - 1) * L + a) * L + b] = std::exp(alpha[(t - 1) * L + a] + p.trans(a, b) +
                                                     p.at(t, b) + beta[t * L + b] - m.log_z);
  return m;
}

std::vector<std::size_t> viterbi(const Potentials& p) {
  const std::size_t T = p.positions, L = p.labels;
  std::vector<std::size_t> out(T);
  if (T == 0) return out;
  // best[t][l]: best score of the suffix t..T-1 given y_t = l, including node t.
  std::vector<double> best(T * L);
  for (std::size_t l = 0; l < L; ++l) best[(T - 1) * L + l] = p.at(T - 1, l);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t l = 0; l < L; ++l) {
      double m = kNegInf;
      for (std::size_t k = 0; k < L; ++k) m = std::max(m, p.trans(l, k) + best[(t + 1) * L + k]);
      best[t * L + l] = p.at(t, l) + m;
    }
  }
  // Forward pass picks the lowest index among maximizers at each step.
  std::size_t prev = L;
  for (std::size_t t = 0; t < T; ++t) {
    std::size_t arg = 0;
    double m = kNegInf;
    for (std::size_t l = 0; l < L; ++l) {
      double v = p.trans(prev, l) + best[t * L + l];
      if (v > m) {
        m = v;
        arg = l;
      }
    }
    out[t] = arg;
    prev = arg;
  }
  return out;
}

double nll_and_gradient(const ChainLayout& layout, std::span<const double> weights,
                        std::span<const TrainingPair> pairs, std::span<double> gradient,
                        std::size_t threads) {
  const std::size_t dim = layout.size();
  if (gradient.size() != dim) throw ValidationError("gradient buffer has the wrong size");
  const std::size_t blocks = (pairs.size() + kBlockSize - 1) / kBlockSize;
  std::vector<double> block_value(blocks, 0.0);
  std::vector<std::vector<double>> block_grad(blocks);
  std::vector<std::exception_ptr> failures(blocks);

  auto run_block = [&](std::size_t b) {
    try {
      block_grad[b].assign(dim, 0.0);
      std::size_t end = std::min(pairs.size(), (b + 1) * kBlockSize);
      for (std::size_t i = b * kBlockSize; i < end; ++i)
        block_value[b] += accumulate_pair(layout, weights, pairs[i], block_grad[b]);
    } catch (...) {
      failures[b] = std::current_exception();
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, blocks));
  if (threads == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < blocks; b += threads) run_block(b);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);

  std::fill(gradient.begin(), gradient.end(), 0.0);
  double value = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    value += block_value[b];
    for (std::size_t k = 0; k < dim; ++k) gradient[k] += block_grad[b][k];
  }
  return value;
}

// ---------------------------------------------------------------------------
// model

std::string CrfModel::feature_name(std::size_t index) const {
  const auto lay = layout();
  const auto& names = catalog.labels;
  if (index < lay.bias_index(0)) {
    std::size_t f = index / lay.labels, l = index % lay.labels;
    return catalog.families[f].name() + "->" + names[l];
  }
  if (index < lay.transition_index(0, 0)) return "bias->" + names[index - lay.bias_index(0)];
  std::size_t rel = index - lay.transition_index(0, 0);
  std::size_t prev = rel / lay.labels, l = rel % lay.labels;
  return "transition(" + (prev == lay.labels ? std::string("<begin>") : names[prev]) + "," +
         names[l] + ")";
}

std::size_t CrfModel::nonzero_weights() const {
  return static_cast<std::size_t>(
      std::count_if(weights.begin(), weights.end(), [](double w) { return w != 0.0; }));
}

Potentials CrfModel::potentials(const ObservationMatrix& observations) const {
  return make_potentials(layout(), weights, observations);
}

double CrfModel::log_partition(const ObservationMatrix& observations) const {
  return crf::log_partition(potentials(observations));
}

double CrfModel::sequence_log_prob(const ObservationMatrix& observations,
                                   std::span<const std::size_t> labels) const {
  Potentials p = potentials(observations);
  return sequence_score(p, labels) - crf::log_partition(p);
}

double CrfModel::sequence_log_prob(const ObservationMatrix& observations,
                                   const std::vector<std::string>& labels) const {
  std::vector<std::size_t> idx;
  for (const auto& l : labels) {
    auto i = catalog.label_index(l);
    if (!i) throw ValidationError("label '" + l + "' is not in the model alphabet");
    idx.push_back(*i);
  }
  return sequence_log_prob(observations, idx);
}

Marginals CrfModel::posterior_marginals(const ObservationMatrix& observations) const {
  return crf::posterior_marginals(potentials(observations));
}

std::vector<std::size_t> CrfModel::viterbi_decode(const ObservationMatrix& observations) const {
  return viterbi(potentials(observations));
}

std::vector<std::string> CrfModel::decode_labels(const ObservationMatrix& observations) const {
  std::vector<std::string> out;
  for (auto l : viterbi_decode(observations)) out.push_back(catalog.labels[l]);
  return out;
}

std::vector<std::size_t> label_indices(const features::FeatureCatalog& catalog,
                                       const xes::Trace& trace) {
  std::vector<std::size_t> out;
  out.reserve(trace.events.size());
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    auto l = trace.events[i].label();
    if (!l) throw ValidationError("event " + std::to_string(i) + " has no label");
    auto idx = catalog.label_index(*l);
    if (!idx) throw ValidationError("label '" + *l + "' is not in the model alphabet");
    out.push_back(*idx);
  }
  return out;
}

CrfModel train(const xes::EventLog& training, const features::FeatureCatalog& catalog,
               const TrainConfig& config) {
  CrfModel model;
  model.catalog = catalog;
  const ChainLayout layout = model.layout();

  std::vector<TrainingPair> pairs;
  pairs.reserve(training.traces.size());
  for (const auto& trace : training.traces)
    pairs.push_back({catalog.evaluate(trace), label_indices(catalog, trace)});

  owlqn::OwlqnConfig opt = config.optimizer;
  opt.l1 = config.l1;
  auto objective = [&](std::span<const double> w, std::span<double> g) {
    return nll_and_gradient(layout, w, pairs, g, config.threads);
  };
  std::vector<double> initial(layout.size(), 0.0);
  owlqn::Result r = owlqn::minimize(objective, initial, opt);

  model.weights = std::move(r.x);
  model.summary.l1 = config.l1;
  model.summary.objective = r.value;
  model.summary.negative_log_likelihood = r.smooth_value;
  model.summary.iterations = r.iterations;
  model.summary.nonzero_weights = model.nonzero_weights();
  model.summary.status = owlqn::to_string(r.status);
  return model;
}

}  // namespace evabs::crf
