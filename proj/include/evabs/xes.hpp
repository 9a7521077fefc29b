#pragma once

// In-memory XES event log model, XML (de)serialization and sensor change-point conversion.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "evabs/error.hpp"

namespace evabs::xes {

/// UTC instant with millisecond precision.
struct Timestamp {
  std::int64_t millis = 0;  // since 1970-01-01T00:00:00.000Z

  auto operator<=>(const Timestamp&) const = default;

  static Timestamp from_seconds(double seconds);
  double seconds() const noexcept { return static_cast<double>(millis) / 1000.0; }
};

/// Parses ISO-8601 (`2015-11-03T08:45:23`, optional fraction, optional `Z` or `+hh:mm`).
/// A missing zone designator is read as UTC. Throws ValueError.
Timestamp parse_timestamp(std::string_view text);
/// Canonical form `YYYY-MM-DDTHH:MM:SS.mmmZ`.
std::string format_timestamp(Timestamp ts);

using AttributeValue = std::variant<std::string, Timestamp, std::int64_t, double, bool>;

enum class ValueKind { text, timestamp, integer, real, boolean };

inline ValueKind kind_of(const AttributeValue& v) { return static_cast<ValueKind>(v.index()); }

struct Attribute {
  std::string key;
  AttributeValue value;
  // Nested attributes are kept but never interpreted.
  std::vector<Attribute> children;
  // XES element name when it is not implied by the value kind ("id", "list", "container").
  std::string xml_tag;

  bool operator==(const Attribute&) const = default;
};

using AttributeMap = std::map<std::string, Attribute>;

namespace keys {
inline constexpr std::string_view concept_name = "concept:name";
inline constexpr std::string_view timestamp = "time:timestamp";
inline constexpr std::string_view lifecycle = "lifecycle:transition";
inline constexpr std::string_view resource = "org:resource";
inline constexpr std::string_view role = "org:role";
inline constexpr std::string_view group = "org:group";
inline constexpr std::string_view label = "label";
}  // namespace keys

/// Shared accessors for anything carrying an AttributeMap.
struct Attributed {
  AttributeMap attributes;

  const Attribute* find(std::string_view key) const;
  bool has(std::string_view key) const { return find(key) != nullptr; }
  /// Text value, or nullopt when absent or not text.
  std::optional<std::string> text(std::string_view key) const;
  std::optional<Timestamp> timestamp() const;

  void set(std::string_view key, AttributeValue value);
  void erase(std::string_view key);

  bool operator==(const Attributed&) const = default;
};

struct Event : Attributed {
  std::optional<std::string> concept_name() const { return text(keys::concept_name); }
  std::optional<std::string> label() const { return text(keys::label); }
  std::optional<std::string> lifecycle() const { return text(keys::lifecycle); }

  bool operator==(const Event&) const = default;
};

struct Trace : Attributed {
  std::vector<Event> events;

  bool operator==(const Trace&) const = default;
};

struct Extension {
  std::string name;
  std::string prefix;
  std::string uri;

  bool operator==(const Extension&) const = default;
};

struct Classifier {
  std::string name;
  std::vector<std::string> keys;

  bool operator==(const Classifier&) const = default;
};

struct EventLog : Attributed {
  std::vector<Extension> extensions;
  AttributeMap global_trace;
  AttributeMap global_event;
  std::vector<Classifier> classifiers;
  std::vector<Trace> traces;

  bool has_extension(std::string_view name) const;
  /// Adds one of the standard extensions (Concept, Time, Lifecycle, Organizational, Semantic).
  void declare_standard_extension(std::string_view name);
  std::size_t event_count() const;

  bool operator==(const EventLog&) const = default;
};

/// Maps capitalized prefixes (`Concept:name`, `Organizational:role`, ...)
/// onto the canonical lower-case XES keys. Other keys are returned unchanged.
std::string normalize_key(std::string_view key);

/// Throws ValidationError when a trace has decreasing timestamps or a classifier
/// references a key that is not a global event attribute.
void validate(const EventLog& log);

EventLog parse_xes(std::istream& in);
EventLog parse_xes(std::string_view document);
EventLog read_xes_file(const std::string& path);

void serialize_xes(const EventLog& log, std::ostream& out);
std::string serialize_xes(const EventLog& log);
void write_xes_file(const EventLog& log, const std::string& path);

// ---- sensor change points ----

struct SensorSample {
  Timestamp time;
  int value = 0;  // 0 or 1
};

struct SensorSeries {
  std::string sensor;
  std::vector<SensorSample> samples;
};

/// One event per change point: value 1 -> lifecycle "start", value 0 -> "complete".
/// Events are grouped into one trace per day, where days begin at `day_boundary_seconds`
/// after midnight UTC. A sensor still "on" when its day ends is reported in `diagnostics`.
EventLog sensor_series_to_log(const std::vector<SensorSeries>& series,
                              std::int64_t day_boundary_seconds = 0,
                              Diagnostics* diagnostics = nullptr);

/// Reads `sensor,timestamp,value` rows (header line required). Throws ValidationError with
/// the 1-based row number on malformed input.
std::vector<SensorSeries> read_sensor_csv(std::istream& in);

}  // namespace evabs::xes
