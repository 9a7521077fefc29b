#pragma once

// Labeled Petri nets with token-game semantics, stochastic playout, and a hierarchical
// generator for annotated low-level logs.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evabs/xes.hpp"

namespace evabs::petri {

using PlaceId = std::size_t;
using TransitionId = std::size_t;

/// Token count per place, indexed by PlaceId.
class Marking {
 public:
  Marking() = default;
  explicit Marking(std::size_t place_count) : tokens_(place_count, 0) {}

  std::size_t size() const noexcept { return tokens_.size(); }
  int operator[](PlaceId p) const { return tokens_.at(p); }
  void add(PlaceId p, int count = 1);
  /// Throws ContractError when the place would go negative.
  void remove(PlaceId p, int count = 1);
  int total() const;

  bool operator==(const Marking&) const = default;

 private:
  std::vector<int> tokens_;
};

struct Transition {
  std::string name;
  std::optional<std::string> label;  // nullopt is the invisible label tau
  std::vector<PlaceId> inputs;
  std::vector<PlaceId> outputs;

  bool visible() const noexcept { return label.has_value(); }
};

/// N = (P, T, F, R, l) together with its initial and final markings. Places and transitions
/// share one name space. Arcs are stored as per-transition input/output place lists.
class LabeledPetriNet {
 public:
  PlaceId add_place(std::string name);
  TransitionId add_transition(std::string name, std::optional<std::string> label);
  /// Adds an arc place->transition or transition->place, looked up by name.
  void add_arc(std::string_view from, std::string_view to);
  void set_initial(const std::map<std::string, int>& tokens);
  void add_final(const std::map<std::string, int>& tokens);

  std::size_t place_count() const noexcept { return places_.size(); }
  std::size_t transition_count() const noexcept { return transitions_.size(); }
  const std::string& place_name(PlaceId p) const { return places_.at(p); }
  const Transition& transition(TransitionId t) const { return transitions_.at(t); }
  const std::vector<Transition>& transitions() const noexcept { return transitions_; }
  std::optional<PlaceId> find_place(std::string_view name) const;
  std::optional<TransitionId> find_transition(std::string_view name) const;

  const Marking& initial_marking() const noexcept { return initial_; }
  const std::vector<Marking>& final_markings() const noexcept { return finals_; }
  bool is_final(const Marking& m) const;
  /// Visible labels R.
  std::vector<std::string> labels() const;

  Marking marking(const std::map<std::string, int>& tokens) const;
  std::string describe(const Marking& m) const;

 private:
  std::vector<std::string> places_;
  std::vector<Transition> transitions_;
  Marking initial_;
  std::vector<Marking> finals_;
};

/// Transitions whose input places all hold at least one token, in ascending id order.
std::vector<TransitionId> enabled_transitions(const LabeledPetriNet& net, const Marking& m);
bool is_enabled(const LabeledPetriNet& net, const Marking& m, TransitionId t);
/// Throws ContractError when t is not enabled in m.
Marking fire(const LabeledPetriNet& net, const Marking& m, TransitionId t);

struct PlayoutOptions {
  std::size_t max_steps = 1000;
  // Chance to stop on each visit to a final marking that still has enabled transitions.
  double stop_probability = 0.5;
};

struct Playout {
  std::vector<std::string> labels;
  std::vector<TransitionId> fired;
  bool reached_final = false;
};

template <typename Rng>
Playout random_playout(const LabeledPetriNet& net, Rng& rng, const PlayoutOptions& options = {});
Playout random_playout(const LabeledPetriNet& net, std::uint64_t seed,
                       const PlayoutOptions& options = {});

/// Reads the plain-text net format:
///   place <name>
///   transition <name> [tau | <label words...>]
///   arc <from> <to>
///   initial <place>[:count] ...
///   final <place>[:count] ...      (one line per final marking)
/// `#` starts a comment. Throws ConfigError with the line number.
LabeledPetriNet parse_net(std::istream& in);
LabeledPetriNet read_net_file(const std::string& path);

struct HierarchicalProcess {
  LabeledPetriNet high_level;
  std::map<std::string, LabeledPetriNet> subprocesses;  // visible high-level label -> net

  /// Throws ConfigError when a visible high-level label lacks a subprocess.
  void check() const;
};

/// The three nets of the medicine/eating motivating example.
LabeledPetriNet taking_medicine_net();
LabeledPetriNet eating_net();
LabeledPetriNet medicine_eating_high_level_net();
HierarchicalProcess medicine_eating_process();

/// Inter-event delays are exponential with the given mean. Trace i starts at
/// origin + i days + first_event_offset.
struct TimestampModel {
  xes::Timestamp origin = xes::parse_timestamp("2015-11-03T00:00:00Z");
  double mean_delay_seconds = 60.0;
  double first_event_offset_seconds = 8 * 3600.0;
};

struct GeneratorOptions {
  std::size_t num_traces = 100;
  std::uint64_t seed = 7;
  TimestampModel timestamps;
  PlayoutOptions playout;
};

/// Low-level log where every event has concept:name (low-level label), label (high-level
/// label) and time:timestamp. Deterministic for fixed inputs.
xes::EventLog generate_annotated_log(const HierarchicalProcess& process,
                                     const GeneratorOptions& options);

}  // namespace evabs::petri
