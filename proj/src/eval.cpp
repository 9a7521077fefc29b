#include "evabs/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include <json.hpp>

namespace evabs::eval {

std::size_t levenshtein_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double levenshtein_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_distance(a, b)) / static_cast<double>(longest);
}

std::string to_string(SimilarityMode m) { return m == SimilarityMode::events ? "events" : "runs"; }

SimilarityMode parse_similarity_mode(const std::string& s) {
  if (s == "events") return SimilarityMode::events;
  if (s == "runs") return SimilarityMode::runs;
  throw ConfigError("unknown similarity mode '" + s + "' (expected events or runs)");
}

// ---------------------------------------------------------------------------

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> l)
    : labels(std::move(l)), counts(labels.size(), std::vector<std::size_t>(labels.size(), 0)) {}

namespace {

std::optional<std::size_t> index_of(const std::vector<std::string>& v, const std::string& s) {
  auto it = std::find(v.begin(), v.end(), s);
  if (it == v.end()) return std::nullopt;
  return static_cast<std::size_t>(it - v.begin());
}

}  // namespace

void ConfusionMatrix::add(const std::string& truth, const std::string& predicted) {
  auto t = index_of(labels, truth), p = index_of(labels, predicted);
  if (!t || !p) throw ContractError("confusion matrix has no row/column for '" + (t ? predicted : truth) + "'");
  ++counts[*t][*p];
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (const auto& row : counts) s = std::accumulate(row.begin(), row.end(), s);
  return s;
}

std::size_t ConfusionMatrix::at(const std::string& truth, const std::string& predicted) const {
  auto t = index_of(labels, truth), p = index_of(labels, predicted);
  return t && p ? counts[*t][*p] : 0;
}

double ConfusionMatrix::precision(std::size_t l) const {
  std::size_t col = 0;
  for (const auto& row : counts) col += row[l];
  return col == 0 ? 0.0 : static_cast<double>(counts[l][l]) / static_cast<double>(col);
}

double ConfusionMatrix::recall(std::size_t l) const {
  std::size_t row = std::accumulate(counts[l].begin(), counts[l].end(), std::size_t{0});
  return row == 0 ? 0.0 : static_cast<double>(counts[l][l]) / static_cast<double>(row);
}

// ---------------------------------------------------------------------------

AbstractionReport score_predictions(const xes::EventLog& truth,
                                    const std::vector<std::vector<std::string>>& predictions,
                                    SimilarityMode mode, const std::string& protocol) {
  if (predictions.size() != truth.traces.size())
    throw ContractError("one prediction per trace required");
  AbstractionReport r;
  r.protocol = protocol;
  r.mode = mode;
  r.predictions = predictions;
  std::set<std::string> alphabet;
  for (std::size_t i = 0; i < truth.traces.size(); ++i) {
    const auto& trace = truth.traces[i];
    auto expected = abstraction::event_labels(trace);
    const auto& got = predictions[i];
    if (got.size() != expected.size())
      throw ContractError("prediction for trace " + std::to_string(i) + " has the wrong length");
    for (std::size_t t = 0; t < expected.size(); ++t) {
      r.events.push_back({i, t, trace.events[t].concept_name().value_or(""), expected[t], got[t]});
      alphabet.insert(expected[t]);
      alphabet.insert(got[t]);
    }
    if (mode == SimilarityMode::events)
      r.similarities.push_back(levenshtein_similarity(expected, got));
    else
      r.similarities.push_back(
          levenshtein_similarity(abstraction::run_labels(expected), abstraction::run_labels(got)));
  }
  r.confusion = ConfusionMatrix({alphabet.begin(), alphabet.end()});
  for (const auto& e : r.events) r.confusion.add(e.truth, e.predicted);
  double sum = 0.0;
  for (double s : r.similarities) sum += s;
  r.mean_similarity = r.similarities.empty() ? 0.0 : sum / static_cast<double>(r.similarities.size());
  return r;
}

namespace {

xes::EventLog subset(const xes::EventLog& log, const std::vector<std::size_t>& fold_of,
                     std::size_t fold, bool inside) {
  xes::EventLog out = log;
  out.traces.clear();
  for (std::size_t i = 0; i < log.traces.size(); ++i)
    if ((fold_of[i] == fold) == inside) out.traces.push_back(log.traces[i]);
  return out;
}

AbstractionReport cross_validate(const xes::EventLog& log, const std::vector<std::size_t>& fold_of,
                                 std::size_t folds, const EvalConfig& config,
                                 const std::string& protocol) {
  for (std::size_t i = 0; i < log.traces.size(); ++i) abstraction::event_labels(log.traces[i]);

  std::vector<std::vector<std::string>> predictions(log.traces.size());
  std::vector<std::vector<std::string>> fold_notes(folds);
  std::vector<std::exception_ptr> failures(folds);

  auto run_fold = [&](std::size_t f) {
    try {
      auto model = abstraction::fit(subset(log, fold_of, f, false), config.abstraction);
      for (std::size_t i = 0; i < log.traces.size(); ++i) {
        if (fold_of[i] != f) continue;
        Diagnostics d;
        auto labeled = abstraction::annotate_trace(model, abstraction::strip_labels(log.traces[i]), &d);
        predictions[i] = abstraction::event_labels(labeled);
        for (auto& m : d.messages) fold_notes[f].push_back("trace " + std::to_string(i) + ": " + m);
      }
    } catch (...) {
      failures[f] = std::current_exception();
    }
  };

  std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, folds));
  if (threads == 1) {
    for (std::size_t f = 0; f < folds; ++f) run_fold(f);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t f = w; f < folds; f += threads) run_fold(f);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : failures)
    if (e) std::rethrow_exception(e);

  AbstractionReport r = score_predictions(log, predictions, config.mode, protocol);
  r.fold_of = fold_of;
  r.folds = folds;
  for (auto& notes : fold_notes)
    for (auto& n : notes) r.diagnostics.push_back(std::move(n));
  return r;
}

}  // namespace

AbstractionReport leave_one_trace_out(const xes::EventLog& log, const EvalConfig& config) {
  if (log.traces.size() < 2) throw ValidationError("leave-one-trace-out needs at least 2 traces");
  std::vector<std::size_t> fold_of(log.traces.size());
  std::iota(fold_of.begin(), fold_of.end(), 0);
  return cross_validate(log, fold_of, fold_of.size(), config, "loocv");
}

std::vector<std::size_t> fold_assignment(std::size_t traces, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (k > traces)
    throw ValidationError("k = " + std::to_string(k) + " exceeds the number of traces (" +
                          std::to_string(traces) + ")");
  std::vector<std::size_t> order(traces);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit uniform draw keeps the permutation portable.
  for (std::size_t i = traces; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::size_t> fold_of(traces);
  const std::size_t base = traces / k, extra = traces % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t s = 0; s < size; ++s) fold_of[order[pos++]] = f;
  }
  return fold_of;
}

AbstractionReport k_fold(const xes::EventLog& log, std::size_t k, std::uint64_t seed,
                         const EvalConfig& config) {
  auto fold_of = fold_assignment(log.traces.size(), k, seed);
  return cross_validate(log, fold_of, k, config, "kfold");
}

ConfusionMatrix confusion_restricted(const AbstractionReport& report,
                                     const std::set<std::string>& low_level_names,
                                     const std::set<std::string>& true_labels) {
  ConfusionMatrix m({true_labels.begin(), true_labels.end()});
  for (const auto& e : report.events) {
    if (!low_level_names.count(e.concept_name)) continue;
    if (!true_labels.count(e.truth) || !true_labels.count(e.predicted)) continue;
    m.add(e.truth, e.predicted);
  }
  return m;
}

// ---------------------------------------------------------------------------
// baselines

namespace {

std::string most_frequent(const std::map<std::string, std::size_t>& counts) {
  std::string best;
  std::size_t n = 0;
  for (const auto& [label, c] : counts)
    if (c > n) {
      best = label;
      n = c;
    }
  return best;
}

template <class Predict>
std::vector<std::vector<std::string>> per_fold(const xes::EventLog& log,
                                               const std::vector<std::size_t>& fold_of,
                                               Predict predict) {
  if (fold_of.size() != log.traces.size()) throw ContractError("one fold index per trace required");
  std::vector<std::vector<std::string>> out(log.traces.size());
  std::set<std::size_t> folds(fold_of.begin(), fold_of.end());
  for (std::size_t f : folds) {
    std::map<std::string, std::size_t> overall;
    std::map<std::string, std::map<std::string, std::size_t>> by_name;
    for (std::size_t i = 0; i < log.traces.size(); ++i) {
      if (fold_of[i] == f) continue;
      for (const auto& e : log.traces[i].events) {
        auto l = e.label();
        if (!l) continue;
        ++overall[*l];
        ++by_name[e.concept_name().value_or("")][*l];
      }
    }
    std::string majority = most_frequent(overall);
    std::map<std::string, std::string> lookup;
    for (const auto& [name, counts] : by_name) lookup[name] = most_frequent(counts);
    for (std::size_t i = 0; i < log.traces.size(); ++i) {
      if (fold_of[i] != f) continue;
      for (const auto& e : log.traces[i].events) out[i].push_back(predict(e, majority, lookup));
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::string>> majority_baseline(const xes::EventLog& log,
                                                        const std::vector<std::size_t>& fold_of) {
  return per_fold(log, fold_of, [](const xes::Event&, const std::string& majority, const auto&) {
    return majority;
  });
}

std::vector<std::vector<std::string>> concept_lookup_baseline(const xes::EventLog& log,
                                                              const std::vector<std::size_t>& fold_of) {
  return per_fold(log, fold_of,
                  [](const xes::Event& e, const std::string& majority,
                     const std::map<std::string, std::string>& lookup) {
                    auto it = lookup.find(e.concept_name().value_or(""));
                    return it == lookup.end() ? majority : it->second;
                  });
}

// ---------------------------------------------------------------------------
// output

void write_report_json(const AbstractionReport& r, std::ostream& out) {
  nlohmann::json j;
  j["protocol"] = r.protocol;
  j["similarity_mode"] = to_string(r.mode);
  j["folds"] = r.folds;
  j["mean_similarity"] = r.mean_similarity;
  j["similarities"] = r.similarities;
  j["fold_of"] = r.fold_of;
  j["confusion"] = {{"labels", r.confusion.labels}, {"counts", r.confusion.counts}};
  nlohmann::json per_label = nlohmann::json::array();
  for (std::size_t l = 0; l < r.confusion.labels.size(); ++l)
    per_label.push_back({{"label", r.confusion.labels[l]},
                         {"precision", r.confusion.precision(l)},
                         {"recall", r.confusion.recall(l)}});
  j["per_label"] = per_label;
  j["predictions"] = r.predictions;
  j["diagnostics"] = r.diagnostics;
  out << j.dump(1) << '\n';
}

void write_report_table(const AbstractionReport& r, std::ostream& out) {
  out << "protocol: " << r.protocol << " (" << r.folds << " folds, similarity over "
      << to_string(r.mode) << ")\n";
  out << "traces: " << r.similarities.size() << "\n";
  out << "mean Levenshtein similarity: " << std::fixed << std::setprecision(4) << r.mean_similarity
      << "\n\n";
  std::size_t w = 10;
  for (const auto& l : r.confusion.labels) w = std::max(w, l.size() + 2);
  out << "confusion (rows = true, columns = predicted)\n" << std::setw(static_cast<int>(w)) << "";
  for (const auto& l : r.confusion.labels) out << std::setw(static_cast<int>(w)) << l;
  out << "\n";
  for (std::size_t i = 0; i < r.confusion.labels.size(); ++i) {
    out << std::setw(static_cast<int>(w)) << r.confusion.labels[i];
    for (auto c : r.confusion.counts[i]) out << std::setw(static_cast<int>(w)) << c;
    out << "\n";
  }
  out << "\n" << std::setw(static_cast<int>(w)) << "label" << std::setw(12) << "precision"
      << std::setw(12) << "recall\n";
  for (std::size_t l = 0; l < r.confusion.labels.size(); ++l)
    out << std::setw(static_cast<int>(w)) << r.confusion.labels[l] << std::setw(12)
        << r.confusion.precision(l) << std::setw(12) << r.confusion.recall(l) << "\n";
  out.unsetf(std::ios::floatfield);
}

}  // namespace evabs::eval
