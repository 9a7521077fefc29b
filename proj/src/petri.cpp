#include "evabs/petri.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace evabs::petri {

void Marking::add(PlaceId p, int count) { tokens_.at(p) += count; }

void Marking::remove(PlaceId p, int count) {
  if (tokens_.at(p) < count) throw ContractError("marking would become negative");
  tokens_[p] -= count;
}

int Marking::total() const { return std::accumulate(tokens_.begin(), tokens_.end(), 0); }

PlaceId LabeledPetriNet::add_place(std::string name) {
  if (find_place(name) || find_transition(name))
    throw ConfigError("duplicate node name '" + name + "'");
  places_.push_back(std::move(name));
  // Markings grow with the net.
  Marking grown(places_.size());
  for (PlaceId p = 0; p < initial_.size(); ++p) grown.add(p, initial_[p]);
  initial_ = grown;
  for (auto& f : finals_) {
    Marking g(places_.size());
    for (PlaceId p = 0; p < f.size(); ++p) g.add(p, f[p]);
    f = g;
  }
  return places_.size() - 1;
}

TransitionId LabeledPetriNet::add_transition(std::string name, std::optional<std::string> label) {
  if (find_place(name) || find_transition(name))
    throw ConfigError("duplicate node name '" + name + "'");
  transitions_.push_back({std::move(name), std::move(label), {}, {}});
  return transitions_.size() - 1;
}

void LabeledPetriNet::add_arc(std::string_view from, std::string_view to) {
  if (auto p = find_place(from)) {
    auto t = find_transition(to);
    if (!t) throw ConfigError("arc " + std::string(from) + "->" + std::string(to) +
                              ": target is not a transition");
    transitions_[*t].inputs.push_back(*p);
    return;
  }
  if (auto t = find_transition(from)) {
    auto p = find_place(to);
    if (!p) throw ConfigError("arc " + std::string(from) + "->" + std::string(to) +
                              ": target is not a place");
    transitions_[*t].outputs.push_back(*p);
    return;
  }
  throw ConfigError("arc source '" + std::string(from) + "' does not exist");
}

Marking LabeledPetriNet::marking(const std::map<std::string, int>& tokens) const {
  Marking m(places_.size());
  for (const auto& [name, count] : tokens) {
    auto p = find_place(name);
    if (!p) throw ConfigError("marking references unknown place '" + name + "'");
    if (count < 0) throw ConfigError("negative token count for place '" + name + "'");
    m.add(*p, count);
  }
  return m;
}

void LabeledPetriNet::set_initial(const std::map<std::string, int>& tokens) {
  initial_ = marking(tokens);
}

void LabeledPetriNet::add_final(const std::map<std::string, int>& tokens) {
  finals_.push_back(marking(tokens));
}

std::optional<PlaceId> LabeledPetriNet::find_place(std::string_view name) const {
  auto it = std::find(places_.begin(), places_.end(), name);
  if (it == places_.end()) return std::nullopt;
  return static_cast<PlaceId>(it - places_.begin());
}

std::optional<TransitionId> LabeledPetriNet::find_transition(std::string_view name) const {
  auto it = std::find_if(transitions_.begin(), transitions_.end(),
                         [&](const Transition& t) { return t.name == name; });
  if (it == transitions_.end()) return std::nullopt;
  return static_cast<TransitionId>(it - transitions_.begin());
}

bool LabeledPetriNet::is_final(const Marking& m) const {
  return std::find(finals_.begin(), finals_.end(), m) != finals_.end();
}

std::vector<std::string> LabeledPetriNet::labels() const {
  std::set<std::string> out;
  for (const auto& t : transitions_)
    if (t.label) out.insert(*t.label);
  return {out.begin(), out.end()};
}

std::string LabeledPetriNet::describe(const Marking& m) const {
  std::string out = "{";
  for (PlaceId p = 0; p < m.size(); ++p) {
    if (m[p] == 0) continue;
    if (out.size() > 1) out += ", ";
    out += places_[p] + ":" + std::to_string(m[p]);
  }
  return out + "}";
}

bool is_enabled(const LabeledPetriNet& net, const Marking& m, TransitionId t) {
  const auto& tr = net.transition(t);
  // An input place listed twice needs two tokens.
  std::map<PlaceId, int> need;
  for (PlaceId p : tr.inputs) ++need[p];
  return std::all_of(need.begin(), need.end(),
                     [&](const auto& kv) { return m[kv.first] >= kv.second; });
}

std::vector<TransitionId> enabled_transitions(const LabeledPetriNet& net, const Marking& m) {
  if (m.size() != net.place_count()) throw ContractError("marking does not match the net");
  std::vector<TransitionId> out;
  for (TransitionId t = 0; t < net.transition_count(); ++t)
    if (is_enabled(net, m, t)) out.push_back(t);
  return out;
}

Marking fire(const LabeledPetriNet& net, const Marking& m, TransitionId t) {
  if (t >= net.transition_count()) throw ContractError("unknown transition id");
  if (!is_enabled(net, m, t))
    throw ContractError("transition '" + net.transition(t).name + "' is not enabled in " +
                        net.describe(m));
  Marking next = m;
  const auto& tr = net.transition(t);
  for (PlaceId p : tr.inputs) next.remove(p);
  for (PlaceId p : tr.outputs) next.add(p);
  return next;
}

template <typename Rng>
Playout random_playout(const LabeledPetriNet& net, Rng& rng, const PlayoutOptions& options) {
  if (options.max_steps == 0) throw ConfigError("max_steps must be positive");
  Playout out;
  Marking m = net.initial_marking();
  std::bernoulli_distribution stop(options.stop_probability);
  for (std::size_t step = 0; step < options.max_steps; ++step) {
    auto enabled = enabled_transitions(net, m);
    if (net.is_final(m)) {
      out.reached_final = true;
      if (enabled.empty() || stop(rng)) return out;
    } else if (enabled.empty()) {
      throw PlayoutError("deadlock in non-final marking " + net.describe(m));
    }
    std::uniform_int_distribution<std::size_t> pick(0, enabled.size() - 1);
    TransitionId t = enabled[pick(rng)];
    m = fire(net, m, t);
    out.fired.push_back(t);
    if (const auto& label = net.transition(t).label) out.labels.push_back(*label);
    out.reached_final = false;
  }
  out.reached_final = net.is_final(m);
  return out;
}

template Playout random_playout<std::mt19937_64>(const LabeledPetriNet&, std::mt19937_64&,
                                                 const PlayoutOptions&);

Playout random_playout(const LabeledPetriNet& net, std::uint64_t seed,
                       const PlayoutOptions& options) {
  std::mt19937_64 rng(seed);
  return random_playout(net, rng, options);
}

// ---------------------------------------------------------------------------
// text format

namespace {

std::map<std::string, int> parse_marking_tokens(std::istringstream& words, std::size_t line) {
  std::map<std::string, int> tokens;
  std::string w;
  while (words >> w) {
    int count = 1;
    auto colon = w.find(':');
    if (colon != std::string::npos) {
      try {
        count = std::stoi(w.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("line " + std::to_string(line) + ": bad token count in '" + w + "'");
      }
      w = w.substr(0, colon);
    }
    tokens[w] += count;
  }
  return tokens;
}

}  // namespace

LabeledPetriNet parse_net(std::istream& in) {
  LabeledPetriNet net;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream words(raw);
    std::string keyword;
    if (!(words >> keyword)) continue;
    try {
      if (keyword == "place") {
        std::string name;
        if (!(words >> name)) throw ConfigError("place without name");
        net.add_place(name);
      } else if (keyword == "transition") {
        std::string name;
        if (!(words >> name)) throw ConfigError("transition without name");
        std::string rest;
        std::getline(words, rest);
        auto b = rest.find_first_not_of(" \t\r");
        rest = b == std::string::npos ? "" : rest.substr(b, rest.find_last_not_of(" \t\r") - b + 1);
        std::optional<std::string> label;
        if (rest.empty()) {
          label = name;
        } else if (rest != "tau") {
          label = rest;
        }
        net.add_transition(name, label);
      } else if (keyword == "arc") {
        std::string from, to;
        if (!(words >> from >> to)) throw ConfigError("arc needs two endpoints");
        net.add_arc(from, to);
      } else if (keyword == "initial") {
        net.set_initial(parse_marking_tokens(words, line));
      } else if (keyword == "final") {
        net.add_final(parse_marking_tokens(words, line));
      } else {
        throw ConfigError("unknown keyword '" + keyword + "'");
      }
    } catch (const ConfigError& e) {
      std::string what = e.what();
      if (what.rfind("line ", 0) == 0) throw;
      throw ConfigError("line " + std::to_string(line) + ": " + what);
    }
  }
  if (net.place_count() == 0) throw ConfigError("net has no places");
  if (net.initial_marking().total() == 0) throw ConfigError("net has an empty initial marking");
  return net;
}

LabeledPetriNet read_net_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open net file '" + path + "'");
  return parse_net(in);
}

// ---------------------------------------------------------------------------
// motivating example

LabeledPetriNet taking_medicine_net() {
  LabeledPetriNet net;
  for (auto p : {"p1", "p2", "p3", "p4", "p5", "p6"}) net.add_place(p);
  net.add_transition("t1", std::nullopt);
  net.add_transition("t2", "MC");
  net.add_transition("t3", "DCC");
  net.add_transition("t4", "W");
  net.add_transition("t5", std::nullopt);
  net.add_arc("p1", "t1");
  net.add_arc("t1", "p2");
  net.add_arc("t1", "p3");
  net.add_arc("p2", "t2");
  net.add_arc("t2", "p4");
  net.add_arc("p3", "t3");
  net.add_arc("t3", "p5");
  net.add_arc("p4", "t4");
  net.add_arc("p5", "t4");
  net.add_arc("t4", "p6");
  // The loop back re-enables MC and W only.
  net.add_arc("p6", "t5");
  net.add_arc("t5", "p2");
  net.add_arc("t5", "p5");
  net.set_initial({{"p1", 1}});
  net.add_final({{"p6", 1}});
  return net;
}

LabeledPetriNet eating_net() {
  LabeledPetriNet net;
  for (auto p : {"p1", "p2", "p3"}) net.add_place(p);
  net.add_transition("t1", std::nullopt);
  net.add_transition("t2", "DCC");
  net.add_transition("t3", "CD");
  net.add_transition("t4", "D");
  net.add_arc("p1", "t1");
  net.add_arc("t1", "p2");
  net.add_arc("t1", "p3");
  net.add_arc("p2", "t2");
  net.add_arc("t2", "p2");
  net.add_arc("p2", "t3");
  net.add_arc("t3", "p2");
  net.add_arc("p3", "t4");
  net.set_initial({{"p1", 1}});
  net.add_final({{"p2", 1}});
  return net;
}

LabeledPetriNet medicine_eating_high_level_net() {
  LabeledPetriNet net;
  net.add_place("p1");
  net.add_place("p2");
  net.add_transition("t1", "Taking medicine");
  net.add_transition("t2", "Eating");
  net.add_arc("p1", "t1");
  net.add_arc("t1", "p2");
  net.add_arc("p2", "t2");
  net.add_arc("t2", "p1");
  net.set_initial({{"p1", 1}});
  net.add_final({{"p2", 1}});
  return net;
}

HierarchicalProcess medicine_eating_process() {
  HierarchicalProcess proc;
  proc.high_level = medicine_eating_high_level_net();
  proc.subprocesses.emplace("Taking medicine", taking_medicine_net());
  proc.subprocesses.emplace("Eating", eating_net());
  return proc;
}

void HierarchicalProcess::check() const {
  for (const auto& label : high_level.labels())
    if (!subprocesses.contains(label))
      throw ConfigError("no subprocess for high-level label '" + label + "'");
}

xes::EventLog generate_annotated_log(const HierarchicalProcess& process,
                                     const GeneratorOptions& options) {
  if (options.num_traces == 0) throw ConfigError("number of traces must be positive");
  if (!(options.timestamps.mean_delay_seconds > 0.0))
    throw ConfigError("mean inter-event delay must be positive");
  process.check();

  std::mt19937_64 rng(options.seed);
  std::exponential_distribution<double> delay(1.0 / options.timestamps.mean_delay_seconds);

  xes::EventLog log;
  for (auto name : {"Concept", "Time"}) log.declare_standard_extension(name);
  log.set(xes::keys::concept_name, std::string("generated"));

  const int width = static_cast<int>(std::to_string(options.num_traces - 1).size());
  for (std::size_t i = 0; i < options.num_traces; ++i) {
    xes::Trace trace;
    std::string id = std::to_string(i);
    trace.set(xes::keys::concept_name, std::string(width - id.size(), '0') + id);

    double clock = options.timestamps.origin.seconds() + static_cast<double>(i) * 86400.0 +
                   options.timestamps.first_event_offset_seconds;
    std::int64_t last_ms = std::numeric_limits<std::int64_t>::min();
    bool first = true;

    Playout high = random_playout(process.high_level, rng, options.playout);
    for (const auto& high_label : high.labels) {
      Playout low = random_playout(process.subprocesses.at(high_label), rng, options.playout);
      for (const auto& low_label : low.labels) {
        if (!first) clock += delay(rng);
        first = false;
        auto ts = xes::Timestamp::from_seconds(clock);
        // Millisecond rounding never reorders events.
        ts.millis = std::max(ts.millis, last_ms);
        last_ms = ts.millis;
        xes::Event e;
        e.set(xes::keys::concept_name, low_label);
        e.set(xes::keys::label, high_label);
        e.set(xes::keys::timestamp, ts);
        trace.events.push_back(std::move(e));
      }
    }
    log.traces.push_back(std::move(trace));
  }
  return log;
}

}  // namespace evabs::petri
