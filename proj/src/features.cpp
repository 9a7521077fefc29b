#include "evabs/features.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace evabs::features {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// XES transactional model: candidate predecessors of each step, most direct first.
const std::map<std::string, std::vector<std::string>>& transactional_predecessors() {
  static const std::map<std::string, std::vector<std::string>> table{
      {"assign", {"schedule"}},
      {"reassign", {"assign", "schedule"}},
      {"start", {"assign", "schedule"}},
      {"suspend", {"start", "resume"}},
      {"resume", {"suspend"}},
      {"complete", {"start", "resume", "assign", "schedule"}},
      {"ate_abort", {"start", "resume", "assign", "schedule"}},
      {"withdraw", {"assign", "schedule"}},
      {"pi_abort", {"assign", "schedule"}},
      {"autoskip", {"assign", "schedule"}},
      {"manualskip", {"assign", "schedule"}},
  };
  return table;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::optional<std::string> lifecycle_step(const xes::Event& e) {
  auto step = e.lifecycle();
  if (!step) return std::nullopt;
  return lower(*step);
}

stats::Context ngram_context(const xes::Trace& trace, std::size_t t, std::size_t n,
                             std::string_view key) {
  stats::Context ctx(n);
  for (std::size_t i = 0; i < n; ++i) {
    // ctx[n-1] is the current event.
    std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(n - 1 - i);
    if (pos < 0) {
      ctx[i] = kBeginOfTrace;
    } else {
      ctx[i] = trace.events[static_cast<std::size_t>(pos)].text(key).value_or(kMissingValue);
    }
  }
  return ctx;
}

bool log_has_text(const xes::EventLog& log, std::string_view key) {
  for (const auto& t : log.traces)
    for (const auto& e : t.events)
      if (e.text(key)) return true;
  return false;
}

bool log_has_timestamps(const xes::EventLog& log) {
  for (const auto& t : log.traces)
    for (const auto& e : t.events)
      if (e.timestamp()) return true;
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// names

std::string to_string(TimeView v) {
  switch (v) {
    case TimeView::day: return "day";
    case TimeView::week: return "week";
    case TimeView::month: return "month";
  }
  return "?";
}

std::string to_string(OrgAttribute o) {
  switch (o) {
    case OrgAttribute::resource: return "resource";
    case OrgAttribute::role: return "role";
    case OrgAttribute::group: return "group";
  }
  return "?";
}

std::string to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::concept_ngram: return "concept_ngram";
    case FamilyKind::org_ngram: return "org_ngram";
    case FamilyKind::time_view: return "time_view";
    case FamilyKind::lifecycle_duration: return "lifecycle_duration";
  }
  return "?";
}

TimeView parse_time_view(const std::string& s) {
  for (auto v : {TimeView::day, TimeView::week, TimeView::month})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown time view '" + s + "'");
}

OrgAttribute parse_org_attribute(const std::string& s) {
  for (auto o : {OrgAttribute::resource, OrgAttribute::role, OrgAttribute::group})
    if (to_string(o) == s) return o;
  throw ConfigError("unknown organizational attribute '" + s + "'");
}

FamilyKind parse_family_kind(const std::string& s) {
  for (auto k : {FamilyKind::concept_ngram, FamilyKind::org_ngram, FamilyKind::time_view,
                 FamilyKind::lifecycle_duration})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown feature family '" + s + "'");
}

std::string_view org_key(OrgAttribute o) {
  switch (o) {
    case OrgAttribute::resource: return xes::keys::resource;
    case OrgAttribute::role: return xes::keys::role;
    case OrgAttribute::group: return xes::keys::group;
  }
  return xes::keys::resource;
}

std::string FeatureFamily::name() const {
  switch (kind) {
    case FamilyKind::concept_ngram: return "concept_ngram(n=" + std::to_string(n) + ")";
    case FamilyKind::org_ngram:
      return "org_ngram(n=" + std::to_string(n) + "," + to_string(org) + ")";
    case FamilyKind::time_view: return "time_view(" + to_string(view) + ")";
    case FamilyKind::lifecycle_duration: return "lifecycle_duration(" + step + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// time views and lifecycle pairing

double time_view_value(xes::Timestamp ts, TimeView view) {
  using namespace std::chrono;
  const std::int64_t ms = ts.millis;
  const std::int64_t day_index =
      ms >= 0 ? ms / 86'400'000 : -((-ms + 86'399'999) / 86'400'000);
  const double in_day = static_cast<double>(ms - day_index * 86'400'000) / 1000.0;
  switch (view) {
    case TimeView::day: return in_day;
    case TimeView::week: {
      sys_days d{days{day_index}};
      unsigned since_monday = weekday{d}.iso_encoding() - 1;
      return since_monday * 86400.0 + in_day;
    }
    case TimeView::month: {
      sys_days d{days{day_index}};
      year_month_day ymd{d};
      sys_days first{ymd.year() / ymd.month() / 1};
      sys_days next{(ymd.year() / ymd.month() / 1) + months{1}};
      double length = (next - first).count() * 86400.0;
      double elapsed = (d - first).count() * 86400.0 + in_day;
      return elapsed / length;
    }
  }
  return 0.0;
}

std::map<std::string, std::string> lifecycle_predecessors(const std::vector<std::string>& steps) {
  std::set<std::string> observed;
  for (const auto& s : steps) observed.insert(lower(s));
  std::map<std::string, std::string> out;
  for (const auto& s : observed) {
    auto it = transactional_predecessors().find(s);
    if (it == transactional_predecessors().end()) continue;
    for (const auto& candidate : it->second) {
      if (observed.contains(candidate)) {
        out[s] = candidate;
        break;
      }
    }
  }
  return out;
}

std::vector<std::optional<std::size_t>> pair_lifecycle_steps(
    const xes::Trace& trace, const std::map<std::string, std::string>& predecessor) {
  std::vector<std::optional<std::size_t>> out(trace.events.size());
  // (activity, step) -> unmatched event indices in arrival order
  std::map<std::pair<std::string, std::string>, std::deque<std::size_t>> open;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& e = trace.events[i];
    auto activity = e.concept_name();
    auto step = lifecycle_step(e);
    if (!activity || !step) continue;
    if (auto pred = predecessor.find(*step); pred != predecessor.end()) {
      auto& queue = open[{*activity, pred->second}];
      if (!queue.empty()) {
        out[i] = queue.front();
        queue.pop_front();
      }
    }
    open[{*activity, *step}].push_back(i);
  }
  return out;
}

std::vector<std::optional<std::size_t>> pair_lifecycle_steps(const xes::Trace& trace) {
  std::vector<std::string> steps;
  for (const auto& e : trace.events)
    if (auto s = lifecycle_step(e)) steps.push_back(*s);
  return pair_lifecycle_steps(trace, lifecycle_predecessors(steps));
}

// ---------------------------------------------------------------------------
// label posteriors

LabelPosterior fit_label_posterior(const std::vector<std::vector<double>>& samples_per_label,
                                   std::size_t k_max, std::uint64_t seed) {
  LabelPosterior out;
  double total = 0.0;
  for (const auto& s : samples_per_label) total += static_cast<double>(s.size());
  if (total == 0.0) throw EstimationError("no samples for any label");
  for (std::size_t l = 0; l < samples_per_label.size(); ++l) {
    const auto& s = samples_per_label[l];
    if (s.empty()) {
      out.log_prior.push_back(kNegInf);
      out.densities.emplace_back(std::nullopt);
      continue;
    }
    out.log_prior.push_back(std::log(static_cast<double>(s.size()) / total));
    out.densities.emplace_back(stats::gmm_select_bic(s, k_max, seed + 97 * l).model);
  }
  return out;
}

std::vector<double> LabelPosterior::responsibilities(double x) const {
  const std::size_t n = log_prior.size();
  std::vector<double> logs(n, kNegInf);
  for (std::size_t l = 0; l < n; ++l)
    if (densities[l]) logs[l] = log_prior[l] + densities[l]->log_density(x);
  double lse = stats::log_sum_exp(logs);
  std::vector<double> out(n, 0.0);
  if (!std::isfinite(lse)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(n));
    return out;
  }
  for (std::size_t l = 0; l < n; ++l) out[l] = std::isfinite(logs[l]) ? std::exp(logs[l] - lse) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// catalog

std::optional<std::size_t> FeatureCatalog::label_index(const std::string& label) const {
  auto it = std::lower_bound(labels.begin(), labels.end(), label);
  if (it == labels.end() || *it != label) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

bool FeatureCatalog::has_family(FamilyKind kind) const {
  return std::any_of(families.begin(), families.end(),
                     [&](const FeatureFamily& f) { return f.kind == kind; });
}

FeatureCatalog build_catalog(const xes::EventLog& training, const FeatureConfig& config) {
  if (config.k_max == 0) throw ConfigError("k_max must be at least 1");
  for (auto n : config.ngram_sizes)
    if (n == 0) throw ConfigError("n-gram size must be at least 1");

  FeatureCatalog cat;
  cat.config = config;

  std::set<std::string> label_set;
  std::vector<std::string> offenders;
  std::size_t unlabeled = 0;
  for (std::size_t ti = 0; ti < training.traces.size(); ++ti) {
    const auto& events = training.traces[ti].events;
    for (std::size_t ei = 0; ei < events.size(); ++ei) {
      if (auto l = events[ei].label())
        label_set.insert(*l);
      else if (++unlabeled <= 10)
        offenders.push_back("trace " + std::to_string(ti) + " event " + std::to_string(ei) + " (" +
                            events[ei].concept_name().value_or("unnamed") + ")");
    }
  }
  if (!offenders.empty()) {
    std::string msg = std::to_string(unlabeled) + " training events without label:";
    for (const auto& o : offenders) msg += " [" + o + "]";
    if (unlabeled > offenders.size()) msg += " ...";
    throw ValidationError(msg);
  }
  if (label_set.empty()) throw ValidationError("training log has no annotated events");
  cat.labels.assign(label_set.begin(), label_set.end());
  const std::size_t n_labels = cat.labels.size();

  auto ngram_table = [&](std::string_view key, std::size_t n) {
    std::vector<std::pair<stats::Context, std::string>> obs;
    for (const auto& trace : training.traces)
      for (std::size_t t = 0; t < trace.events.size(); ++t)
        if (trace.events[t].text(key))
          obs.emplace_back(ngram_context(trace, t, n, key), *trace.events[t].label());
    return stats::multinoulli_fit(obs, config.alpha, cat.labels);
  };

  std::vector<std::size_t> sizes = config.ngram_sizes;
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  if (log_has_text(training, xes::keys::concept_name)) {
    for (auto n : sizes) {
      cat.families.push_back({FamilyKind::concept_ngram, n, {}, {}, {}});
      cat.concept_tables.emplace(n, ngram_table(xes::keys::concept_name, n));
    }
  }
  for (auto o : {OrgAttribute::resource, OrgAttribute::role, OrgAttribute::group}) {
    if (!log_has_text(training, org_key(o))) continue;
    for (auto n : sizes) {
      cat.families.push_back({FamilyKind::org_ngram, n, o, {}, {}});
      cat.org_tables.emplace(std::pair{o, n}, ngram_table(org_key(o), n));
    }
  }

  const bool has_time = log_has_timestamps(training);
  if (has_time) {
    std::vector<TimeView> views = config.views;
    std::sort(views.begin(), views.end());
    views.erase(std::unique(views.begin(), views.end()), views.end());
    for (auto v : views) {
      std::vector<std::vector<double>> samples(n_labels);
      for (const auto& trace : training.traces)
        for (const auto& e : trace.events)
          if (auto ts = e.timestamp())
            samples[*cat.label_index(*e.label())].push_back(time_view_value(*ts, v));
      cat.families.push_back({FamilyKind::time_view, 0, {}, v, {}});
      cat.time_models.emplace(
          v, fit_label_posterior(samples, config.k_max,
                                 config.seed + 1000 * (static_cast<std::uint64_t>(v) + 1)));
    }
  }

  if (has_time) {
    std::vector<std::string> steps;
    for (const auto& trace : training.traces)
      for (const auto& e : trace.events)
        if (auto s = lifecycle_step(e)) steps.push_back(*s);
    cat.lifecycle_predecessor = lifecycle_predecessors(steps);

    // (activity, from, to) -> per-label durations in seconds
    std::map<LifecycleKey, std::vector<std::vector<double>>> durations;
    for (const auto& trace : training.traces) {
      auto matches = pair_lifecycle_steps(trace, cat.lifecycle_predecessor);
      for (std::size_t i = 0; i < trace.events.size(); ++i) {
        if (!matches[i]) continue;
        const auto& e = trace.events[i];
        const auto& prev = trace.events[*matches[i]];
        auto ts = e.timestamp();
        auto prev_ts = prev.timestamp();
        if (!ts || !prev_ts) continue;
        auto step = *lifecycle_step(e);
        LifecycleKey key{*e.concept_name(), cat.lifecycle_predecessor.at(step), step};
        auto& per_label = durations[key];
        if (per_label.empty()) per_label.resize(n_labels);
        per_label[*cat.label_index(*e.label())].push_back(
            static_cast<double>(ts->millis - prev_ts->millis) / 1000.0);
      }
    }
    std::set<std::string> from_steps;
    std::uint64_t idx = 0;
    for (const auto& [key, per_label] : durations) {
      cat.lifecycle_models.emplace(
          key, fit_label_posterior(per_label, config.k_max, config.seed + 50'000 + 31 * idx++));
      from_steps.insert(std::get<1>(key));
    }
    for (const auto& c : from_steps) cat.families.push_back({FamilyKind::lifecycle_duration, 0, {}, {}, c});
    if (cat.lifecycle_models.empty()) cat.lifecycle_predecessor.clear();
  }
  return cat;
}

ObservationMatrix FeatureCatalog::evaluate(const xes::Trace& trace,
                                           Diagnostics* diagnostics) const {
  const std::size_t T = trace.events.size();
  const std::size_t L = labels.size();
  const double neutral = 1.0 / static_cast<double>(L);
  ObservationMatrix m(T, families.size(), L);
  std::size_t neutral_count = 0;

  auto set_neutral = [&](std::size_t t, std::size_t f) {
    for (std::size_t l = 0; l < L; ++l) m.at(t, f, l) = neutral;
    ++neutral_count;
  };
  auto set_values = [&](std::size_t t, std::size_t f, const std::vector<double>& v) {
    for (std::size_t l = 0; l < L; ++l) m.at(t, f, l) = v[l];
  };

  std::vector<std::optional<std::size_t>> matches;
  if (has_family(FamilyKind::lifecycle_duration))
    matches = pair_lifecycle_steps(trace, lifecycle_predecessor);

  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto& fam = families[f];
    for (std::size_t t = 0; t < T; ++t) {
      const auto& e = trace.events[t];
      switch (fam.kind) {
        case FamilyKind::concept_ngram:
        case FamilyKind::org_ngram: {
          std::string_view key =
              fam.kind == FamilyKind::concept_ngram ? xes::keys::concept_name : org_key(fam.org);
          if (!e.text(key)) {
            set_neutral(t, f);
            break;
          }
          const auto& table = fam.kind == FamilyKind::concept_ngram
                                  ? concept_tables.at(fam.n)
                                  : org_tables.at({fam.org, fam.n});
          set_values(t, f, table.distribution(ngram_context(trace, t, fam.n, key)));
          break;
        }
        case FamilyKind::time_view: {
          auto ts = e.timestamp();
          if (!ts) {
            set_neutral(t, f);
            break;
          }
          set_values(t, f, time_models.at(fam.view).responsibilities(time_view_value(*ts, fam.view)));
          break;
        }
        case FamilyKind::lifecycle_duration: {
          auto step = lifecycle_step(e);
          auto name = e.concept_name();
          auto ts = e.timestamp();
          if (!step || !name || !ts) {
            set_neutral(t, f);
            break;
          }
          if (!matches[t]) {
            for (std::size_t l = 0; l < L; ++l) m.at(t, f, l) = neutral;
            break;
          }
          auto pred = lifecycle_predecessor.find(*step);
          auto prev_ts = trace.events[*matches[t]].timestamp();
          if (pred == lifecycle_predecessor.end() || pred->second != fam.step || !prev_ts) {
            // Not this family's step pair: neutral without a diagnostic.
            for (std::size_t l = 0; l < L; ++l) m.at(t, f, l) = neutral;
            break;
          }
          auto model = lifecycle_models.find({*name, fam.step, *step});
          if (model == lifecycle_models.end()) {
            for (std::size_t l = 0; l < L; ++l) m.at(t, f, l) = neutral;
            break;
          }
          double seconds = static_cast<double>(ts->millis - prev_ts->millis) / 1000.0;
          set_values(t, f, model->second.responsibilities(seconds));
          break;
        }
      }
    }
  }
  if (neutral_count > 0)
    note(diagnostics, std::to_string(neutral_count) +
                          " feature evaluations used the neutral value (missing attributes)");
  return m;
}

}  // namespace evabs::features
