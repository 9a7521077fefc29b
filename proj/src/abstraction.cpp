#include "evabs/abstraction.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace evabs::abstraction {

using nlohmann::json;

crf::CrfModel fit(const xes::EventLog& annotated, const AbstractionConfig& config) {
  features::FeatureCatalog catalog = features::build_catalog(annotated, config.features);
  return crf::train(annotated, catalog, config.training);
}

xes::Trace annotate_trace(const crf::CrfModel& model, const xes::Trace& trace,
                          Diagnostics* diagnostics) {
  xes::Trace out = trace;
  if (trace.events.empty()) return out;
  auto decoded = model.decode_labels(model.catalog.evaluate(trace, diagnostics));
  for (std::size_t i = 0; i < out.events.size(); ++i)
    out.events[i].set(xes::keys::label, decoded[i]);
  return out;
}

xes::EventLog annotate(const crf::CrfModel& model, const xes::EventLog& log,
                       Diagnostics* diagnostics) {
  xes::EventLog out = log;
  for (std::size_t i = 0; i < out.traces.size(); ++i) {
    Diagnostics local;
    out.traces[i] = annotate_trace(model, log.traces[i], &local);
    for (auto& m : local.messages) note(diagnostics, "trace " + std::to_string(i) + ": " + m);
  }
  if (!out.global_event.empty() && !out.global_event.count(std::string(xes::keys::label))) {
    xes::Attribute a;
    a.key = xes::keys::label;
    a.value = std::string("UNKNOWN");
    out.global_event[a.key] = a;
  }
  return out;
}

namespace {

std::string describe_event(std::size_t trace_index, std::size_t event_index,
                           const xes::Event& e) {
  std::string s = "trace " + std::to_string(trace_index) + " event " + std::to_string(event_index);
  if (auto n = e.concept_name()) s += " (" + *n + ")";
  return s;
}

xes::Event high_level_event(const std::string& label, const char* transition, xes::Timestamp ts) {
  xes::Event e;
  e.set(xes::keys::concept_name, label);
  e.set(xes::keys::lifecycle, std::string(transition));
  e.set(xes::keys::timestamp, ts);
  return e;
}

}  // namespace

xes::Trace collapse_trace(const xes::Trace& trace, std::size_t trace_index) {
  xes::Trace out;
  out.attributes = trace.attributes;
  std::size_t i = 0;
  const auto& ev = trace.events;
  while (i < ev.size()) {
    auto label = ev[i].label();
    if (!label) throw ValidationError(describe_event(trace_index, i, ev[i]) + " has no label");
    std::size_t j = i;
    std::optional<xes::Timestamp> first, last;
    for (; j < ev.size(); ++j) {
      auto l = ev[j].label();
      if (!l) throw ValidationError(describe_event(trace_index, j, ev[j]) + " has no label");
      if (*l != *label) break;
      auto ts = ev[j].timestamp();
      if (!ts) throw ValidationError(describe_event(trace_index, j, ev[j]) + " has no timestamp");
      if (!first) first = ts;
      last = ts;
    }
    out.events.push_back(high_level_event(*label, "start", *first));
    out.events.push_back(high_level_event(*label, "complete", *last));
    i = j;
  }
  return out;
}

xes::EventLog collapse(const xes::EventLog& annotated) {
  xes::EventLog out;
  out.attributes = annotated.attributes;
  out.global_trace = annotated.global_trace;
  out.declare_standard_extension("Concept");
  out.declare_standard_extension("Lifecycle");
  out.declare_standard_extension("Time");
  for (const auto& ext : annotated.extensions)
    if (!out.has_extension(ext.name)) out.extensions.push_back(ext);
  out.traces.reserve(annotated.traces.size());
  for (std::size_t i = 0; i < annotated.traces.size(); ++i)
    out.traces.push_back(collapse_trace(annotated.traces[i], i));
  return out;
}

std::vector<std::string> run_labels(const std::vector<std::string>& labels) {
  std::vector<std::string> out;
  for (const auto& l : labels)
    if (out.empty() || out.back() != l) out.push_back(l);
  return out;
}

std::vector<std::string> event_labels(const xes::Trace& trace) {
  std::vector<std::string> out;
  out.reserve(trace.events.size());
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    auto l = trace.events[i].label();
    if (!l) throw ValidationError(describe_event(0, i, trace.events[i]) + " has no label");
    out.push_back(*l);
  }
  return out;
}

xes::Trace strip_labels(const xes::Trace& trace) {
  xes::Trace out = trace;
  for (auto& e : out.events) e.erase(xes::keys::label);
  return out;
}

xes::EventLog strip_labels(const xes::EventLog& log) {
  xes::EventLog out = log;
  for (auto& t : out.traces) t = strip_labels(t);
  out.global_event.erase(std::string(xes::keys::label));
  return out;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  if (v == kNegInf) return nullptr;
  throw ModelFormatError("cannot store non-finite value in model");
}

double number_or_neg_inf(const json& j) {
  if (j.is_null()) return kNegInf;
  return j.get<double>();
}

json gmm_to_json(const stats::Gmm& g) {
  json comps = json::array();
  for (const auto& c : g.components) comps.push_back({c.weight, c.mean, c.variance});
  return {{"variance_floor", g.variance_floor}, {"components", comps}};
}

stats::Gmm gmm_from_json(const json& j) {
  stats::Gmm g;
  g.variance_floor = j.at("variance_floor").get<double>();
  for (const auto& c : j.at("components")) {
    if (!c.is_array() || c.size() != 3) throw ModelFormatError("malformed mixture component");
    g.components.push_back({c[0].get<double>(), c[1].get<double>(), c[2].get<double>()});
  }
  if (g.components.empty()) throw ModelFormatError("mixture without components");
  return g;
}

json posterior_to_json(const features::LabelPosterior& p) {
  json prior = json::array(), dens = json::array();
  for (double v : p.log_prior) prior.push_back(number_or_null(v));
  for (const auto& d : p.densities) dens.push_back(d ? gmm_to_json(*d) : json(nullptr));
  return {{"log_prior", prior}, {"densities", dens}};
}

features::LabelPosterior posterior_from_json(const json& j, std::size_t labels) {
  features::LabelPosterior p;
  for (const auto& v : j.at("log_prior")) p.log_prior.push_back(number_or_neg_inf(v));
  for (const auto& d : j.at("densities"))
    p.densities.push_back(d.is_null() ? std::nullopt : std::optional<stats::Gmm>(gmm_from_json(d)));
  if (p.log_prior.size() != labels || p.densities.size() != labels)
    throw ModelFormatError("label posterior does not match the alphabet");
  return p;
}

json table_to_json(const stats::MultinoulliTable& t) {
  json counts = json::array();
  for (const auto& [ctx, c] : t.counts()) counts.push_back({{"context", ctx}, {"counts", c}});
  return {{"arity", t.arity()}, {"alpha", t.alpha()}, {"labels", t.labels()}, {"counts", counts}};
}

stats::MultinoulliTable table_from_json(const json& j) {
  std::map<stats::Context, std::vector<double>> counts;
  for (const auto& e : j.at("counts"))
    counts[e.at("context").get<stats::Context>()] = e.at("counts").get<std::vector<double>>();
  return stats::MultinoulliTable(j.at("arity").get<std::size_t>(), j.at("alpha").get<double>(),
                                 j.at("labels").get<std::vector<std::string>>(), std::move(counts));
}

json family_to_json(const features::FeatureFamily& f) {
  json j = {{"kind", features::to_string(f.kind)}};
  switch (f.kind) {
    case features::FamilyKind::concept_ngram: j["n"] = f.n; break;
    case features::FamilyKind::org_ngram:
      j["n"] = f.n;
      j["org"] = features::to_string(f.org);
      break;
    case features::FamilyKind::time_view: j["view"] = features::to_string(f.view); break;
    case features::FamilyKind::lifecycle_duration: j["step"] = f.step; break;
  }
  return j;
}

features::FeatureFamily family_from_json(const json& j) {
  features::FeatureFamily f;
  f.kind = features::parse_family_kind(j.at("kind").get<std::string>());
  if (j.contains("n")) f.n = j.at("n").get<std::size_t>();
  if (j.contains("org")) f.org = features::parse_org_attribute(j.at("org").get<std::string>());
  if (j.contains("view")) f.view = features::parse_time_view(j.at("view").get<std::string>());
  if (j.contains("step")) f.step = j.at("step").get<std::string>();
  return f;
}

json model_to_json(const crf::CrfModel& m) {
  const auto& cat = m.catalog;
  json config = {{"ngram_sizes", cat.config.ngram_sizes},
                 {"views", json::array()},
                 {"k_max", cat.config.k_max},
                 {"alpha", cat.config.alpha},
                 {"seed", cat.config.seed}};
  for (auto v : cat.config.views) config["views"].push_back(features::to_string(v));

  json families = json::array();
  for (const auto& f : cat.families) families.push_back(family_to_json(f));

  json concept_tables = json::array();
  for (const auto& [n, t] : cat.concept_tables) concept_tables.push_back({{"n", n}, {"table", table_to_json(t)}});
  json org_tables = json::array();
  for (const auto& [key, t] : cat.org_tables)
    org_tables.push_back(
        {{"org", features::to_string(key.first)}, {"n", key.second}, {"table", table_to_json(t)}});
  json time_models = json::array();
  for (const auto& [view, p] : cat.time_models)
    time_models.push_back({{"view", features::to_string(view)}, {"posterior", posterior_to_json(p)}});
  json lifecycle_models = json::array();
  for (const auto& [key, p] : cat.lifecycle_models)
    lifecycle_models.push_back({{"activity", std::get<0>(key)},
                                {"from", std::get<1>(key)},
                                {"to", std::get<2>(key)},
                                {"posterior", posterior_to_json(p)}});
  json predecessor = json::array();
  for (const auto& [step, pred] : cat.lifecycle_predecessor) predecessor.push_back({step, pred});

  json summary = {{"l1", m.summary.l1},
                  {"objective", m.summary.objective},
                  {"negative_log_likelihood", m.summary.negative_log_likelihood},
                  {"iterations", m.summary.iterations},
                  {"nonzero_weights", m.summary.nonzero_weights},
                  {"status", m.summary.status}};

  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"labels", cat.labels},
          {"config", config},
          {"families", families},
          {"concept_tables", concept_tables},
          {"org_tables", org_tables},
          {"time_models", time_models},
          {"lifecycle_models", lifecycle_models},
          {"lifecycle_predecessor", predecessor},
          {"weights", m.weights},
          {"summary", summary}};
}

crf::CrfModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("format") || j.at("format") != kModelFormat)
    throw ModelFormatError("not a model file");
  int version = j.at("version").get<int>();
  if (version != kModelVersion)
    throw ModelFormatError("unsupported model version " + std::to_string(version) + " (expected " +
                           std::to_string(kModelVersion) + ")");
  crf::CrfModel m;
  auto& cat = m.catalog;
  cat.labels = j.at("labels").get<std::vector<std::string>>();
  const std::size_t L = cat.labels.size();

  const auto& config = j.at("config");
  cat.config.ngram_sizes = config.at("ngram_sizes").get<std::vector<std::size_t>>();
  cat.config.views.clear();
  for (const auto& v : config.at("views")) cat.config.views.push_back(features::parse_time_view(v.get<std::string>()));
  cat.config.k_max = config.at("k_max").get<std::size_t>();
  cat.config.alpha = config.at("alpha").get<double>();
  cat.config.seed = config.at("seed").get<std::uint64_t>();

  for (const auto& f : j.at("families")) cat.families.push_back(family_from_json(f));
  for (const auto& e : j.at("concept_tables"))
    cat.concept_tables[e.at("n").get<std::size_t>()] = table_from_json(e.at("table"));
  for (const auto& e : j.at("org_tables"))
    cat.org_tables[{features::parse_org_attribute(e.at("org").get<std::string>()), e.at("n").get<std::size_t>()}] =
        table_from_json(e.at("table"));
  for (const auto& e : j.at("time_models"))
    cat.time_models[features::parse_time_view(e.at("view").get<std::string>())] =
        posterior_from_json(e.at("posterior"), L);
  for (const auto& e : j.at("lifecycle_models"))
    cat.lifecycle_models[{e.at("activity").get<std::string>(), e.at("from").get<std::string>(),
                          e.at("to").get<std::string>()}] = posterior_from_json(e.at("posterior"), L);
  for (const auto& e : j.at("lifecycle_predecessor"))
    cat.lifecycle_predecessor[e.at(0).get<std::string>()] = e.at(1).get<std::string>();

  for (const auto& [n, t] : cat.concept_tables)
    if (t.labels() != cat.labels) throw ModelFormatError("n-gram table alphabet differs from model alphabet");
  for (const auto& [k, t] : cat.org_tables)
    if (t.labels() != cat.labels) throw ModelFormatError("n-gram table alphabet differs from model alphabet");

  m.weights = j.at("weights").get<std::vector<double>>();
  if (m.weights.size() != m.layout().size())
    throw ModelFormatError("weight vector has " + std::to_string(m.weights.size()) +
                           " entries, layout needs " + std::to_string(m.layout().size()));

  const auto& s = j.at("summary");
  m.summary.l1 = s.at("l1").get<double>();
  m.summary.objective = s.at("objective").get<double>();
  m.summary.negative_log_likelihood = s.at("negative_log_likelihood").get<double>();
  m.summary.iterations = s.at("iterations").get<std::size_t>();
  m.summary.nonzero_weights = s.at("nonzero_weights").get<std::size_t>();
  m.summary.status = s.at("status").get<std::string>();
  return m;
}

}  // namespace

void save_model(const crf::CrfModel& model, std::ostream& out) {
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw Error("failed writing model");
}

std::string save_model(const crf::CrfModel& model) {
  std::ostringstream out;
  save_model(model, out);
  return out.str();
}

void save_model_file(const crf::CrfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_model(model, out);
}

crf::CrfModel load_model(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_model_string(buffer.str());
}

crf::CrfModel load_model_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const ModelFormatError&) {
    throw;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model file: ") + e.what());
  } catch (const Error& e) {
    throw ModelFormatError(std::string("malformed model file: ") + e.what());
  }
}

crf::CrfModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace evabs::abstraction
