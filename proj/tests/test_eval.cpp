#include <doctest.h>

#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "evabs/eval.hpp"
#include "evabs/petri.hpp"
#include "support.hpp"

using namespace evabs;
using namespace evabs::eval;

namespace {

using Seq = std::vector<std::string>;

Seq chars(const std::string& s) {
  Seq out;
  for (char c : s) out.emplace_back(1, c);
  return out;
}

// Textbook full-matrix recursion.
std::size_t dp_distance(const Seq& a, const Seq& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

xes::EventLog deterministic_log(std::size_t traces) {
  std::vector<std::vector<testing::Row>> rows;
  for (std::size_t i = 0; i < traces; ++i)
    rows.push_back({{"open", "Start"}, {"work", "Busy"}, {"close", "Stop"}});
  return testing::make_log(rows);
}

}  // namespace

TEST_CASE("Levenshtein examples") {
  CHECK(levenshtein_similarity(chars("abc"), chars("abc")) == 1.0);
  CHECK(levenshtein_similarity({"A", "B", "C"}, {"X", "Y", "Z"}) == 0.0);
  CHECK(levenshtein_distance(chars("kitten"), chars("sitting")) == 3);
  CHECK(levenshtein_similarity(chars("kitten"), chars("sitting")) == doctest::Approx(1.0 - 3.0 / 7.0));
  CHECK(levenshtein_similarity({}, {}) == 1.0);
  CHECK(levenshtein_similarity({}, {"A"}) == 0.0);
}

TEST_CASE("Levenshtein agrees with the full DP table and is a metric") {
  std::mt19937_64 rng(13);
  auto random_seq = [&] {
    Seq s(rng() % 9);
    for (auto& x : s) x = std::string(1, static_cast<char>('a' + rng() % 4));
    return s;
  };
  for (int i = 0; i < 500; ++i) {
    auto a = random_seq(), b = random_seq(), c = random_seq();
    CHECK(levenshtein_distance(a, b) == dp_distance(a, b));
    CHECK(levenshtein_similarity(a, b) == levenshtein_similarity(b, a));
    CHECK((levenshtein_similarity(a, b) == 1.0) == (a == b));
    CHECK(levenshtein_distance(a, c) <= levenshtein_distance(a, b) + levenshtein_distance(b, c));
  }
}

TEST_CASE("confusion matrix bookkeeping") {
  ConfusionMatrix m({"A", "B"});
  m.add("A", "A");
  m.add("A", "B");
  m.add("B", "B");
  CHECK(m.total() == 3);
  CHECK(m.at("A", "B") == 1);
  CHECK(m.precision(1) == 0.5);
  CHECK(m.recall(0) == 0.5);
  CHECK(m.at("Q", "A") == 0);
  CHECK_THROWS_AS(m.add("Q", "A"), ContractError);
}

TEST_CASE("leave-one-out on a perfectly learnable log") {
  auto r = leave_one_trace_out(deterministic_log(4));
  CHECK(r.folds == 4);
  CHECK(r.mean_similarity == 1.0);
  CHECK(r.confusion.total() == 12);
  for (std::size_t l = 0; l < r.confusion.labels.size(); ++l) CHECK(r.confusion.recall(l) == 1.0);
}

TEST_CASE("two traces give two folds; one trace is rejected") {
  auto r = leave_one_trace_out(deterministic_log(2));
  CHECK(r.folds == 2);
  CHECK(r.fold_of == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(leave_one_trace_out(deterministic_log(1)), ValidationError);
}

TEST_CASE("report mean equals the recomputed mean") {
  petri::GeneratorOptions opts;
  opts.num_traces = 12;
  auto log = petri::generate_annotated_log(petri::medicine_eating_process(), opts);
  EvalConfig cfg;
  for (auto mode : {SimilarityMode::events, SimilarityMode::runs}) {
    cfg.mode = mode;
    auto r = k_fold(log, 4, 5, cfg);
    double sum = 0.0;
    for (double s : r.similarities) sum += s;
    CHECK(std::abs(r.mean_similarity - sum / r.similarities.size()) <= 1e-12);
    CHECK(r.confusion.total() == log.event_count());
    // Recompute every similarity from the stored predictions.
    for (std::size_t i = 0; i < log.traces.size(); ++i) {
      auto truth = abstraction::event_labels(log.traces[i]);
      double expected = mode == SimilarityMode::events
                            ? levenshtein_similarity(truth, r.predictions[i])
                            : levenshtein_similarity(abstraction::run_labels(truth), abstraction::run_labels(r.predictions[i]));
      CHECK(r.similarities[i] == expected);
    }
  }
}

TEST_CASE("fold assignment partitions traces evenly and reproducibly") {
  for (std::size_t n : {10u, 11u, 23u}) {
    for (std::size_t k : {2u, 3u, 10u}) {
      auto f = fold_assignment(n, k, 42);
      CHECK(f == fold_assignment(n, k, 42));
      std::vector<std::size_t> sizes(k, 0);
      std::set<std::size_t> seen;
      for (std::size_t i = 0; i < n; ++i) {
        REQUIRE(f[i] < k);
        ++sizes[f[i]];
        seen.insert(i);
      }
      CHECK(seen.size() == n);  // every trace in exactly one fold
      CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == n);
      auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
      CHECK(*hi - *lo <= 1);
    }
  }
  CHECK_THROWS_AS(fold_assignment(5, 6, 1), ValidationError);
  CHECK_THROWS_AS(fold_assignment(5, 1, 1), ConfigError);
  auto f = fold_assignment(6, 6, 3);
  CHECK(std::set<std::size_t>(f.begin(), f.end()).size() == 6);
}

TEST_CASE("k-fold is reproducible and k = |traces| scores like leave-one-out") {
  auto log = deterministic_log(5);
  auto a = k_fold(log, 5, 1);
  CHECK(a == k_fold(log, 5, 1));
  auto loo = leave_one_trace_out(log);
  CHECK(a.folds == loo.folds);
  CHECK(a.similarities == loo.similarities);
}

TEST_CASE("fold evaluation is identical with threads") {
  petri::GeneratorOptions opts;
  opts.num_traces = 9;
  auto log = petri::generate_annotated_log(petri::medicine_eating_process(), opts);
  EvalConfig one, many;
  many.threads = 3;
  CHECK(k_fold(log, 3, 2, one) == k_fold(log, 3, 2, many));
}

TEST_CASE("restricted confusion") {
  auto log = deterministic_log(3);
  std::vector<std::vector<std::string>> perfect;
  for (const auto& t : log.traces) perfect.push_back(abstraction::event_labels(t));
  auto r = score_predictions(log, perfect, SimilarityMode::events, "given");
  auto m = confusion_restricted(r, {"open", "close"}, {"Start", "Stop"});
  CHECK(m.counts == std::vector<std::vector<std::size_t>>{{3, 0}, {0, 3}});
  CHECK(confusion_restricted(r, {"absent"}, {"Start", "Stop"}).total() == 0);
  CHECK(confusion_restricted(r, {}, {}).labels.empty());
}

TEST_CASE("baselines") {
  auto log = testing::make_log({{{"a", "X"}, {"b", "Y"}, {"b", "Y"}}, {{"a", "X"}, {"b", "Y"}}, {{"a", "Y"}}});
  std::vector<std::size_t> folds{0, 1, 2};
  auto maj = majority_baseline(log, folds);
  CHECK(maj[2] == std::vector<std::string>{"Y"});
  auto look = concept_lookup_baseline(log, folds);
  CHECK(look[0] == std::vector<std::string>{"X", "Y", "Y"});  // a seen once as X, once as Y: tie goes to X
  CHECK(look[2] == std::vector<std::string>{"X"});
}

TEST_CASE("report output") {
  auto r = leave_one_trace_out(deterministic_log(2));
  std::ostringstream js, table;
  write_report_json(r, js);
  auto j = nlohmann::json::parse(js.str());
  CHECK(j["mean_similarity"] == 1.0);
  CHECK(j["protocol"] == "loocv");
  CHECK(j["confusion"]["labels"].size() == 3);
  write_report_table(r, table);
  CHECK(table.str().find("mean Levenshtein similarity: 1.0000") != std::string::npos);
  CHECK(parse_similarity_mode("runs") == SimilarityMode::runs);
  CHECK_THROWS_AS(parse_similarity_mode("slices"), ConfigError);
}
