// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero if any fail.
// Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "evabs/abstraction.hpp"
#include "evabs/eval.hpp"
#include "evabs/owlqn.hpp"
#include "evabs/petri.hpp"
#include "evabs/stats.hpp"
#include "support.hpp"

using namespace evabs;
using testing::rel_close;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1 ---------------------------------------------------------------------------
Outcome inference_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::size_t sequences = 0;
  for (int model = 0; model < 50; ++model) {
    std::size_t L = 1 + rng() % 4, T = 1 + rng() % 6, F = 1 + rng() % 4;
    auto c = testing::random_chain(rng, L, F, T, 2.0);
    auto p = crf::make_potentials(c.layout, c.weights, c.obs);
    const double log_z = testing::brute_log_z(c);
    o.require(rel_close(crf::log_partition(p), log_z, 1e-9), "log_partition differs from enumeration");

    auto m = crf::posterior_marginals(p);
    std::vector<double> node(T * L, 0.0), edge(T > 1 ? (T - 1) * L * L : 0, 0.0);
    double best = -INFINITY;
    std::vector<std::size_t> argmax;
    for (const auto& y : testing::all_sequences(L, T)) {
      ++sequences;
      double s = testing::direct_score(c, y);
      double lp = crf::sequence_score(p, y) - crf::log_partition(p);
      o.require(rel_close(lp, s - log_z, 1e-9), "sequence_log_prob differs from enumeration");
      double prob = std::exp(s - log_z);
      for (std::size_t t = 0; t < T; ++t) {
        node[t * L + y[t]] += prob;
        if (t > 0) edge[((t - 1) * L + y[t - 1]) * L + y[t]] += prob;
      }
      if (s > best) {  // first strictly better in lexicographic order
        best = s;
        argmax = y;
      }
    }
    for (std::size_t i = 0; i < node.size(); ++i)
      o.require(rel_close(m.node[i], node[i], 1e-9), "node marginal differs from enumeration");
    for (std::size_t i = 0; i < edge.size(); ++i)
      o.require(rel_close(m.edge[i], edge[i], 1e-9), "edge marginal differs from enumeration");
    o.require(crf::viterbi(p) == argmax, "viterbi differs from brute-force argmax");
  }
  // Ties: with all-zero weights every sequence scores the same.
  crf::ChainLayout lay{3, 1};
  features::ObservationMatrix obs(5, 1, 3);
  o.require(crf::viterbi(crf::make_potentials(lay, std::vector<double>(lay.size(), 0.0), obs)) ==
                std::vector<std::size_t>(5, 0),
            "tie-break is not lexicographic");
  o.detail = o.pass ? "50 models, " + std::to_string(sequences) + " sequences enumerated" : o.detail;
  return o;
}

// 2 ---------------------------------------------------------------------------
Outcome gradient_check() {
  Outcome o;
  std::mt19937_64 rng(77);
  double worst = 0.0;
  std::size_t max_dim = 0;
  for (int inst = 0; inst < 20; ++inst) {
    std::size_t L = 2 + rng() % 3, F = 1 + rng() % 5;
    crf::ChainLayout lay{L, F};
    while (lay.size() > 50) lay = {L, --F};
    max_dim = std::max(max_dim, lay.size());
    std::vector<crf::TrainingPair> pairs;
    for (int k = 0; k < 5; ++k) {
      std::size_t T = 1 + rng() % 6;
      auto c = testing::random_chain(rng, L, F, T);
      std::vector<std::size_t> y(T);
      for (auto& v : y) v = rng() % L;
      pairs.push_back({c.obs, y});
    }
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> w(lay.size()), g(lay.size()), scratch(lay.size());
    for (auto& v : w) v = n(rng);
    crf::nll_and_gradient(lay, w, pairs, g);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double h = 1e-5;
      auto wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      double fd = (crf::nll_and_gradient(lay, wp, pairs, scratch) -
                   crf::nll_and_gradient(lay, wm, pairs, scratch)) / (2 * h);
      double rel = std::abs(fd - g[k]) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  o.require(worst <= 1e-5, "finite-difference mismatch");
  char buf[128];
  std::snprintf(buf, sizeof buf, "20 instances, dims <= %zu, worst relative error %.2e", max_dim, worst);
  o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
  return o;
}

// 3 ---------------------------------------------------------------------------
Outcome optimizer_check() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 2.0);
  std::uniform_real_distribution<double> uc(0.0, 2.0);
  double worst_l1 = 0.0, worst_spd = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> b(10);
    for (auto& v : b) v = n(rng);
    owlqn::OwlqnConfig cfg;
    cfg.l1 = uc(rng);
    auto f = [&](std::span<const double> x, std::span<double> g) {
      double v = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = x[i] - b[i];
        v += 0.5 * g[i] * g[i];
      }
      return v;
    };
    auto r = owlqn::minimize(f, std::vector<double>(b.size(), 0.0), cfg);
    for (std::size_t i = 0; i < b.size(); ++i) {
      double expect = (b[i] > 0 ? 1.0 : -1.0) * std::max(std::abs(b[i]) - cfg.l1, 0.0);
      worst_l1 = std::max(worst_l1, std::abs(r.x[i] - expect));
    }
  }
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + trial % 4;
    std::normal_distribution<double> u(0.0, 1.0);
    std::vector<double> m(d * d), a(d * d, 0.0), b(d);
    for (auto& v : m) v = u(rng);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < d; ++k) a[i * d + j] += m[k * d + i] * m[k * d + j];
        if (i == j) a[i * d + j] += 0.3;
      }
    for (auto& v : b) v = u(rng);
    auto f = [&](std::span<const double> x, std::span<double> g) {
      double v = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double ax = 0.0;
        for (std::size_t j = 0; j < d; ++j) ax += a[i * d + j] * x[j];
        g[i] = ax - b[i];
        v += 0.5 * x[i] * ax - b[i] * x[i];
      }
      return v;
    };
    auto r = owlqn::minimize(f, std::vector<double>(d, 0.0));
    // Direct solve: Gauss-Jordan on a copy.
    std::vector<double> aa = a, x = b;
    for (std::size_t k = 0; k < d; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < d; ++i)
        if (std::abs(aa[i * d + k]) > std::abs(aa[piv * d + k])) piv = i;
      for (std::size_t j = 0; j < d; ++j) std::swap(aa[k * d + j], aa[piv * d + j]);
      std::swap(x[k], x[piv]);
      for (std::size_t i = 0; i < d; ++i) {
        if (i == k) continue;
        double f2 = aa[i * d + k] / aa[k * d + k];
        for (std::size_t j = 0; j < d; ++j) aa[i * d + j] -= f2 * aa[k * d + j];
        x[i] -= f2 * x[k];
      }
    }
    for (std::size_t i = 0; i < d; ++i) worst_spd = std::max(worst_spd, std::abs(r.x[i] - x[i] / aa[i * d + i]));
  }
  o.require(worst_l1 <= 1e-6, "soft-threshold solution missed");
  o.require(worst_spd <= 1e-6, "SPD quadratic solution missed");
  char buf[128];
  std::snprintf(buf, sizeof buf, "soft-threshold max error %.2e, SPD max error %.2e", worst_l1, worst_spd);
  o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
  return o;
}

xes::EventLog synthetic(std::size_t traces, std::uint64_t seed) {
  petri::GeneratorOptions opts;
  opts.num_traces = traces;
  opts.seed = seed;
  return petri::generate_annotated_log(petri::medicine_eating_process(), opts);
}

// 4 ---------------------------------------------------------------------------
Outcome sparsity_check() {
  Outcome o;
  auto log = synthetic(100, 7);
  auto cat = features::build_catalog(log);
  crf::TrainConfig small, large;
  small.l1 = 0.01;
  large.l1 = 100.0;
  auto a = crf::train(log, cat, small);
  auto b = crf::train(log, cat, large);
  o.require(b.summary.nonzero_weights < a.summary.nonzero_weights, "no sparsification");
  o.detail = "nonzero weights " + std::to_string(a.summary.nonzero_weights) + "/" +
             std::to_string(a.weights.size()) + " at C=0.01, " + std::to_string(b.summary.nonzero_weights) +
             "/" + std::to_string(b.weights.size()) + " at C=100";
  return o;
}

// 5 ---------------------------------------------------------------------------
Outcome estimator_check() {
  Outcome o;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> a(-2.0, 1.0), b(3.0, 2.5);
    std::vector<double> x(300);
    for (auto& v : x) v = rng() % 2 ? a(rng) : b(rng);
    auto fit = stats::gmm_fit_em(x, 1 + seed % 4, seed);
    for (std::size_t i = 1; i < fit.log_likelihood_trace.size(); ++i)
      o.require(fit.log_likelihood_trace[i] >= fit.log_likelihood_trace[i - 1] - 1e-9,
                "EM log-likelihood decreased");
  }
  int one = 0, two = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::normal_distribution<double> single(5.0, 2.0), left(0.0, 1.0), right(50.0, 1.0);
    std::vector<double> x(500), y(500);
    for (auto& v : x) v = single(rng);
    for (auto& v : y) v = rng() % 2 ? left(rng) : right(rng);
    if (stats::gmm_select_bic(x, 4, seed).model.components.size() == 1) ++one;
    if (stats::gmm_select_bic(y, 4, seed).model.components.size() == 2) ++two;
  }
  o.require(one >= 18, "BIC missed k=1 too often");
  o.require(two >= 18, "BIC missed k=2 too often");
  std::string counts = "BIC chose k=1 in " + std::to_string(one) + "/20, k=2 in " + std::to_string(two) + "/20";
  o.detail = o.pass ? "EM monotone on 20 runs; " + counts : o.detail + " (" + counts + ")";
  return o;
}

// 6 ---------------------------------------------------------------------------
const char* kExampleTrace = R"(<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>
  <extension name="Time" prefix="time" uri="http://www.xes-standard.org/time.xesext"/>
  <trace>
    <string key="concept:name" value="1"/>
    <event><string key="concept:name" value="Medicine cabinet"/><date key="time:timestamp" value="2015-11-03T08:45:23.000Z"/><string key="label" value="Taking medicine"/></event>
    <event><string key="concept:name" value="Dishes &amp; cups cabinet"/><date key="time:timestamp" value="2015-11-03T08:46:11.000Z"/><string key="label" value="Taking medicine"/></event>
    <event><string key="concept:name" value="Water"/><date key="time:timestamp" value="2015-11-03T08:46:45.000Z"/><string key="label" value="Taking medicine"/></event>
    <event><string key="concept:name" value="Dishes &amp; cups cabinet"/><date key="time:timestamp" value="2015-11-03T08:47:59.000Z"/><string key="label" value="Eating"/></event>
    <event><string key="concept:name" value="Dishwasher"/><date key="time:timestamp" value="2015-11-03T08:48:29.000Z"/><string key="label" value="Eating"/></event>
    <event><string key="concept:name" value="Dishes &amp; cups cabinet"/><date key="time:timestamp" value="2015-11-03T17:10:58.000Z"/><string key="label" value="Taking medicine"/></event>
    <event><string key="concept:name" value="Medicine cabinet"/><date key="time:timestamp" value="2015-11-03T17:11:09.000Z"/><string key="label" value="Taking medicine"/></event>
    <event><string key="concept:name" value="Water"/><date key="time:timestamp" value="2015-11-03T17:11:18.000Z"/><string key="label" value="Taking medicine"/></event>
  </trace>
</log>
)";

std::string expected_right() {
  std::string s =
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<log xes.version=\"1.0\" xes.features=\"nested-attributes\">\n"
      "  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n"
      "  <extension name=\"Lifecycle\" prefix=\"lifecycle\" uri=\"http://www.xes-standard.org/lifecycle.xesext\"/>\n"
      "  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n"
      "  <trace>\n"
      "    <string key=\"concept:name\" value=\"1\"/>\n";
  const char* rows[][3] = {{"Taking medicine", "start", "08:45:23"}, {"Taking medicine", "complete", "08:46:45"},
                           {"Eating", "start", "08:47:59"},          {"Eating", "complete", "08:48:29"},
                           {"Taking medicine", "start", "17:10:58"}, {"Taking medicine", "complete", "17:11:18"}};
  for (auto& r : rows) {
    s += "    <event>\n";
    s += std::string("      <string key=\"concept:name\" value=\"") + r[0] + "\"/>\n";
    s += std::string("      <string key=\"lifecycle:transition\" value=\"") + r[1] + "\"/>\n";
    s += std::string("      <date key=\"time:timestamp\" value=\"2015-11-03T") + r[2] + ".000Z\"/>\n";
    s += "    </event>\n";
  }
  s += "  </trace>\n</log>\n";
  return s;
}

Outcome collapse_check() {
  Outcome o;
  auto left = xes::parse_xes(std::string_view(kExampleTrace));
  auto got = xes::serialize_xes(abstraction::collapse(left));
  o.require(got == expected_right(), "collapsed document differs from the expected bytes");
  o.detail = o.pass ? "8 events -> 6 high-level events, byte-identical" : o.detail + "\n" + got;
  return o;
}

// 7 ---------------------------------------------------------------------------
// Achieved on the seeded run: see the decisions record. Regression bound:
constexpr double kAlternationBound = 0.90;

Outcome synthetic_experiment() {
  Outcome o;
  auto log = synthetic(200, 7);
  auto report = eval::leave_one_trace_out(log);
  auto maj = eval::score_predictions(log, eval::majority_baseline(log, report.fold_of), eval::SimilarityMode::events, "majority");
  auto look = eval::score_predictions(log, eval::concept_lookup_baseline(log, report.fold_of), eval::SimilarityMode::events, "lookup");

  static const std::regex alternating("^T(ET)*$");
  std::size_t ok = 0;
  for (const auto& pred : report.predictions) {
    std::string runs;
    for (const auto& l : abstraction::run_labels(pred)) runs += l == "Taking medicine" ? "T" : "E";
    if (std::regex_match(runs, alternating)) ++ok;
  }
  double rate = static_cast<double>(ok) / static_cast<double>(report.predictions.size());
  o.require(report.mean_similarity > maj.mean_similarity, "CRF does not beat the majority baseline");
  o.require(report.mean_similarity > look.mean_similarity, "CRF does not beat the concept lookup baseline");
  o.require(rate >= kAlternationBound, "alternation rate below bound");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "CRF %.4f vs majority %.4f, lookup %.4f; alternating %zu/%zu = %.3f (bound %.2f)",
                report.mean_similarity, maj.mean_similarity, look.mean_similarity, ok,
                report.predictions.size(), rate, kAlternationBound);
  o.detail = o.pass ? buf : o.detail + " (" + buf + ")";
  return o;
}

// 8 ---------------------------------------------------------------------------
Outcome levenshtein_check() {
  Outcome o;
  auto chars = [](const std::string& s) {
    std::vector<std::string> v;
    for (char c : s) v.emplace_back(1, c);
    return v;
  };
  auto dp = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
      for (std::size_t j = 1; j <= b.size(); ++j)
        d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    return d[a.size()][b.size()];
  };
  auto k = chars("kitten"), s = chars("sitting");
  double oracle = 1.0 - static_cast<double>(dp(k, s)) / 7.0;
  o.require(std::abs(eval::levenshtein_similarity(k, s) - oracle) <= 1e-15, "kitten/sitting value");
  o.require(std::abs(oracle - (1.0 - 3.0 / 7.0)) <= 1e-15, "DP oracle disagrees with 3 edits");
  std::mt19937_64 rng(8);
  auto rnd = [&] {
    std::vector<std::string> v(rng() % 10);
    for (auto& x : v) x = std::string(1, static_cast<char>('a' + rng() % 3));
    return v;
  };
  for (int i = 0; i < 1000; ++i) {
    auto a = rnd(), b = rnd(), c = rnd();
    o.require(eval::levenshtein_similarity(a, b) == eval::levenshtein_similarity(b, a), "asymmetric");
    o.require((eval::levenshtein_similarity(a, b) == 1.0) == (a == b), "identity of indiscernibles");
    o.require(eval::levenshtein_distance(a, c) <= eval::levenshtein_distance(a, b) + eval::levenshtein_distance(b, c),
              "triangle inequality");
  }
  if (o.pass) o.detail = "kitten/sitting = 1-3/7; 1000 random triples";
  return o;
}

// 9 ---------------------------------------------------------------------------
Outcome round_trip_check() {
  Outcome o;
  auto log = synthetic(100, 7);
  auto text = xes::serialize_xes(log);
  auto back = xes::parse_xes(std::string_view(text));
  o.require(back == log, "XES round trip changed the log");
  o.require(xes::serialize_xes(back) == text, "XES reserialization differs");

  auto model = abstraction::fit(synthetic(100, 7));
  auto saved = abstraction::save_model(model);
  auto loaded = abstraction::load_model_string(saved);
  o.require(abstraction::save_model(loaded) == saved, "model reserialization differs");
  auto test = abstraction::strip_labels(synthetic(100, 8));
  o.require(abstraction::annotate(loaded, test) == abstraction::annotate(model, test), "reloaded model predicts differently");
  bool same_marginals = true;
  for (const auto& t : test.traces) {
    auto obs = model.catalog.evaluate(t);
    same_marginals = same_marginals && model.posterior_marginals(obs).node == loaded.posterior_marginals(loaded.catalog.evaluate(t)).node;
  }
  o.require(same_marginals, "reloaded model marginals differ");
  if (o.pass) o.detail = "100-trace XES log and trained model reproduce exactly";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds; 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> all = {
      {1, "inference matches enumeration", 10, inference_oracle},
      {2, "gradient matches finite differences", 30, gradient_check},
      {3, "optimizer reaches closed-form optima", 10, optimizer_check},
      {4, "larger L1 gives sparser weights", 0, sparsity_check},
      {5, "EM monotone and BIC selects true k", 60, estimator_check},
      {6, "collapse reproduces the example bytes", 0, collapse_check},
      {7, "synthetic leave-one-out experiment", 300, synthetic_experiment},
      {8, "Levenshtein metric properties", 5, levenshtein_check},
      {9, "XES and model round trips", 0, round_trip_check},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    double secs = seconds_since(t0);
    if (c.time_limit > 0 && secs >= c.time_limit) {
      o.pass = false;
      o.detail += " [too slow]";
    }
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2fs%s", secs,
                  c.time_limit > 0 ? (" < " + std::to_string(static_cast<int>(c.time_limit)) + "s").c_str() : "");
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " -- " << o.detail
              << " (" << timing << ")" << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
