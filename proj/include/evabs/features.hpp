#pragma once

// Feature functions derived from XES extensions: n-gram multinoulli probabilities over concept
// names and organizational attributes, per-label time-of-period mixtures, and lifecycle
// duration mixtures. Every observation family yields one value per candidate label.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "evabs/stats.hpp"
#include "evabs/xes.hpp"

namespace evabs::features {

enum class TimeView { day, week, month };
enum class OrgAttribute { resource, role, group };
enum class FamilyKind { concept_ngram, org_ngram, time_view, lifecycle_duration };

std::string to_string(TimeView v);
std::string to_string(OrgAttribute o);
std::string to_string(FamilyKind k);
TimeView parse_time_view(const std::string& s);
OrgAttribute parse_org_attribute(const std::string& s);
FamilyKind parse_family_kind(const std::string& s);

std::string_view org_key(OrgAttribute o);

/// Padding symbol for n-gram positions before the first event.
inline const std::string kBeginOfTrace = "\x02" "BOT";
/// Stand-in for an event of the context that lacks the attribute.
inline const std::string kMissingValue = "\x02" "NONE";

struct FeatureConfig {
  std::vector<std::size_t> ngram_sizes{1, 2, 3};
  std::vector<TimeView> views{TimeView::day, TimeView::week, TimeView::month};
  std::size_t k_max = 3;
  double alpha = 1.0;
  std::uint64_t seed = 1;

  bool operator==(const FeatureConfig&) const = default;
};

struct FeatureFamily {
  FamilyKind kind = FamilyKind::concept_ngram;
  std::size_t n = 0;                                // n-gram families
  OrgAttribute org = OrgAttribute::resource;        // org_ngram
  TimeView view = TimeView::day;                    // time_view
  std::string step;                                 // lifecycle_duration: predecessor step c

  std::string name() const;
  bool operator==(const FeatureFamily&) const = default;
};

/// P(l | x) proportional to prior(l) * density_l(x), with one BIC-selected mixture per label.
/// Labels without training samples get probability zero.
struct LabelPosterior {
  std::vector<double> log_prior;          // -inf for labels without samples
  std::vector<std::optional<stats::Gmm>> densities;

  std::vector<double> responsibilities(double x) const;
  bool operator==(const LabelPosterior&) const = default;
};

LabelPosterior fit_label_posterior(const std::vector<std::vector<double>>& samples_per_label,
                                   std::size_t k_max, std::uint64_t seed);

/// Values v[t][family][label] for one trace.
struct ObservationMatrix {
  std::size_t positions = 0;
  std::size_t families = 0;
  std::size_t labels = 0;
  std::vector<double> values;

  ObservationMatrix() = default;
  ObservationMatrix(std::size_t t, std::size_t f, std::size_t l)
      : positions(t), families(f), labels(l), values(t * f * l, 0.0) {}

  double& at(std::size_t t, std::size_t f, std::size_t l) {
    return values[(t * families + f) * labels + l];
  }
  double at(std::size_t t, std::size_t f, std::size_t l) const {
    return values[(t * families + f) * labels + l];
  }
  bool operator==(const ObservationMatrix&) const = default;
};

using LifecycleKey = std::tuple<std::string, std::string, std::string>;  // activity, from, to

struct FeatureCatalog {
  std::vector<std::string> labels;  // sorted; index = label id
  std::vector<FeatureFamily> families;
  FeatureConfig config;

  std::map<std::size_t, stats::MultinoulliTable> concept_tables;
  std::map<std::pair<OrgAttribute, std::size_t>, stats::MultinoulliTable> org_tables;
  std::map<TimeView, LabelPosterior> time_models;
  std::map<LifecycleKey, LabelPosterior> lifecycle_models;
  std::map<std::string, std::string> lifecycle_predecessor;  // step -> predecessor step

  std::size_t label_count() const noexcept { return labels.size(); }
  std::size_t family_count() const noexcept { return families.size(); }
  std::optional<std::size_t> label_index(const std::string& label) const;
  bool has_family(FamilyKind kind) const;

  /// Evaluates every family on every position. Missing attributes yield 1/|labels|
  /// and a diagnostic.
  ObservationMatrix evaluate(const xes::Trace& trace, Diagnostics* diagnostics = nullptr) const;

  bool operator==(const FeatureCatalog&) const = default;
};

/// Requires a label on every event. Includes only the families whose attributes occur in the
/// log and fits their sub-models. Throws ValidationError for unannotated input.
FeatureCatalog build_catalog(const xes::EventLog& training, const FeatureConfig& config = {});

inline ObservationMatrix evaluate_observations(const FeatureCatalog& catalog,
                                               const xes::Trace& trace,
                                               Diagnostics* diagnostics = nullptr) {
  return catalog.evaluate(trace, diagnostics);
}

/// Seconds since the start of the UTC day / ISO week, or fraction of the calendar month.
double time_view_value(xes::Timestamp ts, TimeView view);

/// Nearest observed predecessor in the XES transactional lifecycle for each observed step.
std::map<std::string, std::string> lifecycle_predecessors(const std::vector<std::string>& steps);

/// For each event, the index of the event holding its predecessor lifecycle step for the same
/// activity, matched first-in first-out; nullopt when unmatched.
std::vector<std::optional<std::size_t>> pair_lifecycle_steps(
    const xes::Trace& trace, const std::map<std::string, std::string>& predecessor);
/// Uses the steps observed in the trace itself.
std::vector<std::optional<std::size_t>> pair_lifecycle_steps(const xes::Trace& trace);

}  // namespace evabs::features
