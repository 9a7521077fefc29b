#pragma once

// Levenshtein similarity, cross-validation drivers and confusion matrices.

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "evabs/abstraction.hpp"

namespace evabs::eval {

std::size_t levenshtein_distance(const std::vector<std::string>& a, const std::vector<std::string>& b);
/// 1 - d(a, b) / max(|a|, |b|); two empty sequences score 1.
double levenshtein_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Scores per-event label sequences, or the label sequence of collapsed runs.
enum class SimilarityMode { events, runs };
std::string to_string(SimilarityMode m);
SimilarityMode parse_similarity_mode(const std::string& s);

struct ConfusionMatrix {
  std::vector<std::string> labels;  // row/column order
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]

  explicit ConfusionMatrix(std::vector<std::string> labels = {});
  void add(const std::string& truth, const std::string& predicted);
  std::size_t total() const;
  std::size_t at(const std::string& truth, const std::string& predicted) const;
  double precision(std::size_t label) const;  // NaN-free: 0 when nothing predicted
  double recall(std::size_t label) const;

  bool operator==(const ConfusionMatrix&) const = default;
};

struct EventRecord {
  std::size_t trace = 0;
  std::size_t position = 0;
  std::string concept_name;
  std::string truth;
  std::string predicted;

  bool operator==(const EventRecord&) const = default;
};

struct AbstractionReport {
  std::string protocol;
  SimilarityMode mode = SimilarityMode::events;
  std::vector<double> similarities;  // per trace, in log order
  std::vector<std::size_t> fold_of;  // per trace
  std::size_t folds = 0;
  double mean_similarity = 0.0;
  ConfusionMatrix confusion;
  std::vector<EventRecord> events;
  std::vector<std::vector<std::string>> predictions;  // per trace, per event
  std::vector<std::string> diagnostics;

  bool operator==(const AbstractionReport&) const = default;
};

struct EvalConfig {
  abstraction::AbstractionConfig abstraction;
  SimilarityMode mode = SimilarityMode::events;
  std::size_t threads = 1;  // folds run concurrently
};

/// Trains on all traces but one and predicts the held-out trace, for every trace.
AbstractionReport leave_one_trace_out(const xes::EventLog& log, const EvalConfig& config = {});

/// Assignment of traces to folds: a seeded shuffle cut into k parts whose sizes differ by at
/// most one.
std::vector<std::size_t> fold_assignment(std::size_t traces, std::size_t k, std::uint64_t seed);
AbstractionReport k_fold(const xes::EventLog& log, std::size_t k, std::uint64_t seed,
                         const EvalConfig& config = {});

/// Builds a report from explicit predictions (one label vector per trace).
AbstractionReport score_predictions(const xes::EventLog& truth,
                                    const std::vector<std::vector<std::string>>& predictions,
                                    SimilarityMode mode, const std::string& protocol);

ConfusionMatrix confusion_restricted(const AbstractionReport& report,
                                     const std::set<std::string>& low_level_names,
                                     const std::set<std::string>& true_labels);

/// Predicts the most frequent training label everywhere.
std::vector<std::vector<std::string>> majority_baseline(const xes::EventLog& log,
                                                        const std::vector<std::size_t>& fold_of);
/// Predicts, per concept name, its most frequent training label (majority label for unseen
/// names).
std::vector<std::vector<std::string>> concept_lookup_baseline(const xes::EventLog& log,
                                                              const std::vector<std::size_t>& fold_of);

void write_report_json(const AbstractionReport& report, std::ostream& out);
void write_report_table(const AbstractionReport& report, std::ostream& out);

}  // namespace evabs::eval
