#pragma once

// Fixtures and brute-force oracles shared by the test programs.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evabs/crf.hpp"
#include "evabs/xes.hpp"

namespace testing {

using namespace evabs;

inline xes::Event make_event(const std::string& name, const std::string& label,
                             const std::string& time = "") {
  xes::Event e;
  e.set(xes::keys::concept_name, name);
  if (!label.empty()) e.set(xes::keys::label, label);
  if (!time.empty()) e.set(xes::keys::timestamp, xes::parse_timestamp(time));
  return e;
}

struct Row {
  std::string name;
  std::string label;
  std::string time;
};

inline xes::EventLog make_log(const std::vector<std::vector<Row>>& traces) {
  xes::EventLog log;
  log.declare_standard_extension("Concept");
  log.declare_standard_extension("Time");
  for (std::size_t i = 0; i < traces.size(); ++i) {
    xes::Trace t;
    t.set(xes::keys::concept_name, std::to_string(i + 1));
    for (const auto& r : traces[i]) t.events.push_back(make_event(r.name, r.label, r.time));
    log.traces.push_back(std::move(t));
  }
  return log;
}

// One annotated morning-and-evening trace of the medicine/eating routine.
inline xes::EventLog example_trace_log() {
  return make_log({{
      {"Medicine cabinet", "Taking medicine", "2015-11-03T08:45:23Z"},
      {"Dishes & cups cabinet", "Taking medicine", "2015-11-03T08:46:11Z"},
      {"Water", "Taking medicine", "2015-11-03T08:46:45Z"},
      {"Dishes & cups cabinet", "Eating", "2015-11-03T08:47:59Z"},
      {"Dishwasher", "Eating", "2015-11-03T08:48:29Z"},
      {"Dishes & cups cabinet", "Taking medicine", "2015-11-03T17:10:58Z"},
      {"Medicine cabinet", "Taking medicine", "2015-11-03T17:11:09Z"},
      {"Water", "Taking medicine", "2015-11-03T17:11:18Z"},
  }});
}

// ---- CRF brute force ----

struct RandomChain {
  crf::ChainLayout layout;
  std::vector<double> weights;
  features::ObservationMatrix obs;
};

inline RandomChain random_chain(std::mt19937_64& rng, std::size_t L, std::size_t F, std::size_t T,
                                double scale = 1.0) {
  RandomChain c;
  c.layout = {L, F};
  std::normal_distribution<double> w(0.0, scale);
  std::uniform_real_distribution<double> v(0.0, 1.0);
  c.weights.resize(c.layout.size());
  for (auto& x : c.weights) x = w(rng);
  c.obs = features::ObservationMatrix(T, F, L);
  for (auto& x : c.obs.values) x = v(rng);
  return c;
}

// All label sequences of length T over L labels in lexicographic order.
inline std::vector<std::vector<std::size_t>> all_sequences(std::size_t L, std::size_t T) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> cur(T, 0);
  while (true) {
    out.push_back(cur);
    std::size_t i = T;
    while (i > 0) {
      if (++cur[i - 1] < L) break;
      cur[i - 1] = 0;
      --i;
    }
    if (i == 0) break;
  }
  return out;
}

// Score computed straight from the weight layout, without the potentials code.
inline double direct_score(const RandomChain& c, const std::vector<std::size_t>& y) {
  const auto& lay = c.layout;
  double s = 0.0;
  std::size_t prev = lay.labels;
  for (std::size_t t = 0; t < y.size(); ++t) {
    for (std::size_t f = 0; f < lay.families; ++f)
      s += c.weights[f * lay.labels + y[t]] * c.obs.at(t, f, y[t]);
    s += c.weights[lay.families * lay.labels + y[t]];
    s += c.weights[lay.families * lay.labels + lay.labels + prev * lay.labels + y[t]];
    prev = y[t];
  }
  return s;
}

inline double brute_log_z(const RandomChain& c) {
  auto seqs = all_sequences(c.layout.labels, c.obs.positions);
  double m = -INFINITY;
  std::vector<double> s;
  for (const auto& y : seqs) {
    s.push_back(direct_score(c, y));
    m = std::max(m, s.back());
  }
  double acc = 0.0;
  for (double v : s) acc += std::exp(v - m);
  return m + std::log(acc);
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("evabs_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
