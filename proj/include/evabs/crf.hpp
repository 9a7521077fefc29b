#pragma once

// Linear-chain conditional random field over label-attached observation features.
//
// Score of a labeling y given observations x:
//   sum_t [ sum_f w(f, y_t) v(t, f, y_t) + b(y_t) + a(y_{t-1}, y_t) ]
// where y_0 is a distinguished begin-of-sequence state. All inference runs in log space.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "evabs/features.hpp"
#include "evabs/owlqn.hpp"

namespace evabs::crf {

using features::ObservationMatrix;

/// Weight vector layout: [observation (family, label)] [bias (label)] [transition (prev, label)],
/// with prev == labels denoting the begin-of-sequence state.
struct ChainLayout {
  std::size_t labels = 0;
  std::size_t families = 0;

  std::size_t observation_index(std::size_t family, std::size_t label) const {
    return family * labels + label;
  }
  std::size_t bias_index(std::size_t label) const { return families * labels + label; }
  std::size_t transition_index(std::size_t prev, std::size_t label) const {
    return families * labels + labels + prev * labels + label;
  }
  std::size_t begin_state() const { return labels; }
  std::size_t size() const { return families * labels + labels + (labels + 1) * labels; }
};

/// Log-potentials of one sequence: node[t][l] and transition[prev][l] (prev may be begin).
struct Potentials {
  std::size_t positions = 0;
  std::size_t labels = 0;
  std::vector<double> node;
  std::vector<double> transition;

  double at(std::size_t t, std::size_t l) const { return node[t * labels + l]; }
  double trans(std::size_t prev, std::size_t l) const { return transition[prev * labels + l]; }
};

Potentials make_potentials(const ChainLayout& layout, std::span<const double> weights,
                           const ObservationMatrix& observations);

double sequence_score(const Potentials& p, std::span<const std::size_t> labels);
/// Forward recursion.
double log_partition(const Potentials& p);
/// Backward recursion; equals log_partition up to rounding.
double log_partition_backward(const Potentials& p);

struct Marginals {
  std::size_t positions = 0;
  std::size_t labels = 0;
  double log_z = 0.0;
  std::vector<double> node;  // [t][l]
  std::vector<double> edge;  // [t-1][prev][l] for t >= 1

  double at(std::size_t t, std::size_t l) const { return node[t * labels + l]; }
  double pair(std::size_t t, std::size_t prev, std::size_t l) const {
    return edge[((t - 1) * labels + prev) * labels + l];
  }
};

Marginals posterior_marginals(const Potentials& p);

/// Highest-scoring labeling; among equal scores the lexicographically smallest sequence of
/// label indices wins.
std::vector<std::size_t> viterbi(const Potentials& p);

struct TrainingPair {
  ObservationMatrix observations;
  std::vector<std::size_t> labels;
};

/// Negative conditional log-likelihood summed over pairs and its gradient (written to
/// `gradient`). Partial sums are formed over fixed blocks of pairs and reduced in order, so
/// the result does not depend on `threads`.
double nll_and_gradient(const ChainLayout& layout, std::span<const double> weights,
                        std::span<const TrainingPair> pairs, std::span<double> gradient,
                        std::size_t threads = 1);

struct TrainConfig {
  double l1 = 0.1;
  owlqn::OwlqnConfig optimizer;
  std::size_t threads = 1;
};

struct TrainingSummary {
  double l1 = 0.0;
  double objective = 0.0;
  double negative_log_likelihood = 0.0;
  std::size_t iterations = 0;
  std::size_t nonzero_weights = 0;
  std::string status;

  bool operator==(const TrainingSummary&) const = default;
};

struct CrfModel {
  features::FeatureCatalog catalog;
  std::vector<double> weights;
  TrainingSummary summary;

  const std::vector<std::string>& labels() const { return catalog.labels; }
  ChainLayout layout() const { return {catalog.label_count(), catalog.family_count()}; }
  std::string feature_name(std::size_t index) const;
  std::size_t nonzero_weights() const;

  Potentials potentials(const ObservationMatrix& observations) const;
  double log_partition(const ObservationMatrix& observations) const;
  /// Throws ValidationError for a label index outside the alphabet or a length mismatch.
  double sequence_log_prob(const ObservationMatrix& observations,
                           std::span<const std::size_t> labels) const;
  double sequence_log_prob(const ObservationMatrix& observations,
                           const std::vector<std::string>& labels) const;
  Marginals posterior_marginals(const ObservationMatrix& observations) const;
  std::vector<std::size_t> viterbi_decode(const ObservationMatrix& observations) const;
  std::vector<std::string> decode_labels(const ObservationMatrix& observations) const;

  bool operator==(const CrfModel&) const = default;
};

/// Label indices of a trace's `label` attributes under the catalog alphabet.
std::vector<std::size_t> label_indices(const features::FeatureCatalog& catalog,
                                       const xes::Trace& trace);

/// Minimizes NLL + l1 * |w|_1 from w = 0.
CrfModel train(const xes::EventLog& training, const features::FeatureCatalog& catalog,
               const TrainConfig& config = {});

}  // namespace evabs::crf
