#pragma once

// Train on annotated traces, label unannotated ones, and collapse label runs into
// start/complete high-level events.

#include <iosfwd>
#include <string>

#include "evabs/crf.hpp"
#include "evabs/features.hpp"
#include "evabs/xes.hpp"

namespace evabs::abstraction {

struct AbstractionConfig {
  features::FeatureConfig features;
  crf::TrainConfig training;
};

/// Every event must carry a label; otherwise ValidationError listing offenders.
crf::CrfModel fit(const xes::EventLog& annotated, const AbstractionConfig& config = {});

/// Copy of `log` with every event's label set to the decoded label. Events lacking attributes
/// a family needs get neutral values; the diagnostics say which.
xes::EventLog annotate(const crf::CrfModel& model, const xes::EventLog& log,
                       Diagnostics* diagnostics = nullptr);
xes::Trace annotate_trace(const crf::CrfModel& model, const xes::Trace& trace,
                          Diagnostics* diagnostics = nullptr);

/// Each maximal run of equal labels within a trace becomes a start event at the run's first
/// timestamp and a complete event at its last.
xes::EventLog collapse(const xes::EventLog& annotated);
xes::Trace collapse_trace(const xes::Trace& trace, std::size_t trace_index = 0);

/// Label of each maximal run, in order.
std::vector<std::string> run_labels(const std::vector<std::string>& labels);
std::vector<std::string> event_labels(const xes::Trace& trace);

xes::EventLog strip_labels(const xes::EventLog& log);
xes::Trace strip_labels(const xes::Trace& trace);

// Model files are JSON. Loading checks the format tag and version and throws
// ModelFormatError on any inconsistency.
inline constexpr const char* kModelFormat = "evabs-crf-model";
inline constexpr int kModelVersion = 1;

void save_model(const crf::CrfModel& model, std::ostream& out);
std::string save_model(const crf::CrfModel& model);
void save_model_file(const crf::CrfModel& model, const std::string& path);
crf::CrfModel load_model(std::istream& in);
crf::CrfModel load_model_string(const std::string& text);
crf::CrfModel load_model_file(const std::string& path);

}  // namespace evabs::abstraction
