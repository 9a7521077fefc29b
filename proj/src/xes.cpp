#include "evabs/xes.hpp"

#include <expat.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace evabs::xes {

namespace {

struct StandardExtension {
  std::string_view name;
  std::string_view prefix;
  std::string_view uri;
};

constexpr std::array<StandardExtension, 5> kStandardExtensions{{
    {"Concept", "concept", "http://www.xes-standard.org/concept.xesext"},
    {"Time", "time", "http://www.xes-standard.org/time.xesext"},
    {"Lifecycle", "lifecycle", "http://www.xes-standard.org/lifecycle.xesext"},
    {"Organizational", "org", "http://www.xes-standard.org/org.xesext"},
    {"Semantic", "semantic", "http://www.xes-standard.org/semantic.xesext"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

// ---------------------------------------------------------------------------
// timestamps

Timestamp Timestamp::from_seconds(double seconds) {
  return Timestamp{static_cast<std::int64_t>(std::llround(seconds * 1000.0))};
}

Timestamp parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  auto fail = [&]() -> ValueError {
    return ValueError("unparseable timestamp '" + std::string(text) + "'");
  };
  // YYYY-MM-DD[Thh:mm[:ss[.fff]]][Z|+hh:mm|-hh:mm]
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') throw fail();
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d))
    throw fail();
  std::size_t pos = 10;
  std::int64_t millis = 0;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
    if (text.size() < pos + 6 || text[pos + 3] != ':') throw fail();
    if (!parse_int(text.substr(pos + 1, 2), h) || !parse_int(text.substr(pos + 4, 2), mi))
      throw fail();
    pos += 6;
    if (pos < text.size() && text[pos] == ':') {
      if (text.size() < pos + 3 || !parse_int(text.substr(pos + 1, 2), s)) throw fail();
      pos += 3;
      if (pos < text.size() && (text[pos] == '.' || text[pos] == ',')) {
        ++pos;
        std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos == start) throw fail();
        // Digits beyond milliseconds are truncated.
        std::string digits(text.substr(start, std::min<std::size_t>(pos - start, 3)));
        digits.resize(3, '0');
        millis = std::stoll(digits);
      }
    }
  }
  std::int64_t offset_minutes = 0;
  if (pos < text.size()) {
    if (text[pos] == 'Z' && pos + 1 == text.size()) {
      ++pos;
    } else if ((text[pos] == '+' || text[pos] == '-') && text.size() >= pos + 3) {
      int oh = 0, om = 0;
      if (!parse_int(text.substr(pos + 1, 2), oh)) throw fail();
      std::size_t rest = pos + 3;
      if (rest < text.size() && text[rest] == ':') ++rest;
      if (rest < text.size()) {
        if (text.size() != rest + 2 || !parse_int(text.substr(rest, 2), om)) throw fail();
        rest += 2;
      }
      offset_minutes = (text[pos] == '-' ? -1 : 1) * (oh * 60 + om);
      pos = rest;
    } else {
      throw fail();
    }
  }
  if (pos != text.size()) throw fail();
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw fail();
  auto days = sys_days{ymd}.time_since_epoch().count();
  std::int64_t seconds = static_cast<std::int64_t>(days) * 86400 + h * 3600 + mi * 60 + s -
                         offset_minutes * 60;
  return Timestamp{seconds * 1000 + millis};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  std::int64_t ms = ts.millis;
  std::int64_t day_count = ms >= 0 ? ms / 86'400'000 : -((-ms + 86'399'999) / 86'400'000);
  std::int64_t in_day = ms - day_count * 86'400'000;
  year_month_day ymd{sys_days{days{day_count}}};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(in_day / 3'600'000),
                int(in_day / 60'000 % 60), int(in_day / 1000 % 60), int(in_day % 1000));
  return buf;
}

// ---------------------------------------------------------------------------
// attribute helpers

const Attribute* Attributed::find(std::string_view key) const {
  auto it = attributes.find(std::string(key));
  return it == attributes.end() ? nullptr : &it->second;
}

std::optional<std::string> Attributed::text(std::string_view key) const {
  const Attribute* a = find(key);
  if (a == nullptr) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&a->value)) return *s;
  return std::nullopt;
}

std::optional<Timestamp> Attributed::timestamp() const {
  const Attribute* a = find(keys::timestamp);
  if (a == nullptr) return std::nullopt;
  if (const auto* t = std::get_if<Timestamp>(&a->value)) return *t;
  return std::nullopt;
}

void Attributed::set(std::string_view key, AttributeValue value) {
  Attribute& a = attributes[std::string(key)];
  a.key = std::string(key);
  a.value = std::move(value);
  a.xml_tag.clear();
}

void Attributed::erase(std::string_view key) { attributes.erase(std::string(key)); }

bool EventLog::has_extension(std::string_view name) const {
  return std::any_of(extensions.begin(), extensions.end(),
                     [&](const Extension& e) { return e.name == name; });
}

void EventLog::declare_standard_extension(std::string_view name) {
  if (has_extension(name)) return;
  for (const auto& ext : kStandardExtensions) {
    if (ext.name == name) {
      extensions.push_back({std::string(ext.name), std::string(ext.prefix), std::string(ext.uri)});
      return;
    }
  }
  throw ConfigError("unknown standard extension '" + std::string(name) + "'");
}

std::size_t EventLog::event_count() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.events.size();
  return n;
}

std::string normalize_key(std::string_view key) {
  auto colon = key.find(':');
  if (colon == std::string_view::npos) return std::string(key);
  std::string prefix = lower(key.substr(0, colon));
  if (prefix == "organizational") prefix = "org";
  for (const auto& ext : kStandardExtensions) {
    if (ext.prefix == prefix) {
      std::string suffix(key.substr(colon + 1));
      if (prefix != "time" || lower(suffix) == "timestamp") suffix = lower(suffix);
      if (prefix == "semantic" && lower(suffix) == "modelreference") suffix = "modelReference";
      return prefix + ":" + suffix;
    }
  }
  return std::string(key);
}

void validate(const EventLog& log) {
  for (const auto& c : log.classifiers) {
    for (const auto& k : c.keys) {
      if (!log.global_event.contains(k))
        throw ValidationError("classifier '" + c.name + "' references key '" + k +
                              "' that is not a global event attribute");
    }
  }
  for (std::size_t ti = 0; ti < log.traces.size(); ++ti) {
    std::optional<Timestamp> last;
    const auto& events = log.traces[ti].events;
    for (std::size_t ei = 0; ei < events.size(); ++ei) {
      auto ts = events[ei].timestamp();
      if (!ts) continue;
      if (last && *ts < *last)
        throw ValidationError("trace " + std::to_string(ti) + ": event " + std::to_string(ei) +
                              " has a timestamp earlier than its predecessor");
      last = ts;
    }
  }
}

// ---------------------------------------------------------------------------
// parsing

namespace {

AttributeValue typed_value(std::string_view tag, const std::string& key, const std::string& raw) {
  try {
    if (tag == "string" || tag == "id") return raw;
    if (tag == "date") return parse_timestamp(raw);
    if (tag == "int") {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc{} || ptr != raw.data() + raw.size()) throw ValueError("bad integer");
      return v;
    }
    if (tag == "float") {
      std::size_t used = 0;
      double v = std::stod(raw, &used);
      if (used != raw.size()) throw ValueError("bad float");
      return v;
    }
    if (tag == "boolean") {
      std::string l = lower(raw);
      if (l == "true") return true;
      if (l == "false") return false;
      throw ValueError("bad boolean");
    }
  } catch (const std::exception&) {
    throw ValueError("attribute '" + key + "': cannot read '" + raw + "' as " + std::string(tag));
  }
  return raw;
}

bool is_attribute_tag(std::string_view tag) {
  return tag == "string" || tag == "date" || tag == "int" || tag == "float" ||
         tag == "boolean" || tag == "id" || tag == "list" || tag == "container";
}

std::vector<std::string> split_classifier_keys(std::string_view keys) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < keys.size()) {
    while (i < keys.size() && keys[i] == ' ') ++i;
    if (i >= keys.size()) break;
    if (keys[i] == '\'') {
      auto end = keys.find('\'', i + 1);
      if (end == std::string_view::npos) end = keys.size();
      out.emplace_back(keys.substr(i + 1, end - i - 1));
      i = end + 1;
    } else {
      auto end = keys.find(' ', i);
      if (end == std::string_view::npos) end = keys.size();
      out.emplace_back(keys.substr(i, end - i));
      i = end;
    }
  }
  for (auto& k : out) k = normalize_key(k);
  return out;
}

enum class Scope { none, log, trace, event, global_trace, global_event, values };

class XesBuilder {
 public:
  explicit XesBuilder(XML_Parser parser) : parser_(parser) {}

  EventLog take() {
    if (!saw_log_) throw ParseError("document has no <log> element");
    return std::move(log_);
  }

  void start(std::string_view tag, const XML_Char** atts) {
    auto attr = [&](std::string_view name) -> std::optional<std::string> {
      for (int i = 0; atts[i] != nullptr; i += 2)
        if (name == atts[i]) return std::string(atts[i + 1]);
      return std::nullopt;
    };
    if (tag == "log") {
      if (saw_log_) error("nested <log> element");
      saw_log_ = true;
      scopes_.push_back(Scope::log);
      return;
    }
    if (!saw_log_) error("expected <log> as root element, found <" + std::string(tag) + ">");
    if (!attribute_stack_.empty()) {
      if (tag == "values") {
        scopes_.push_back(Scope::values);
        return;
      }
      if (!is_attribute_tag(tag)) error("unexpected <" + std::string(tag) + "> inside attribute");
      push_attribute(tag, attr("key"), attr("value"));
      return;
    }
    Scope scope = scopes_.empty() ? Scope::none : scopes_.back();
    if (tag == "trace") {
      if (scope != Scope::log) error("<trace> outside <log>");
      log_.traces.emplace_back();
      scopes_.push_back(Scope::trace);
    } else if (tag == "event") {
      if (scope != Scope::trace) error("<event> outside <trace>");
      log_.traces.back().events.emplace_back();
      scopes_.push_back(Scope::event);
    } else if (tag == "extension") {
      log_.extensions.push_back({attr("name").value_or(""), attr("prefix").value_or(""),
                                 attr("uri").value_or("")});
      scopes_.push_back(Scope::none);
    } else if (tag == "global") {
      auto s = attr("scope").value_or("event");
      scopes_.push_back(s == "trace" ? Scope::global_trace : Scope::global_event);
    } else if (tag == "classifier") {
      log_.classifiers.push_back(
          {attr("name").value_or(""), split_classifier_keys(attr("keys").value_or(""))});
      scopes_.push_back(Scope::none);
    } else if (is_attribute_tag(tag)) {
      push_attribute(tag, attr("key"), attr("value"));
    } else {
      // Unknown element: ignored together with its content.
      scopes_.push_back(Scope::none);
    }
  }

  void end(std::string_view tag) {
    if (is_attribute_tag(tag) && !attribute_stack_.empty()) {
      Attribute done = std::move(attribute_stack_.back());
      attribute_stack_.pop_back();
      if (!attribute_stack_.empty()) {
        attribute_stack_.back().children.push_back(std::move(done));
      } else {
        AttributeMap& target = current_map();
        std::string key = done.key;
        target[key] = std::move(done);
      }
      return;
    }
    if (!scopes_.empty()) scopes_.pop_back();
  }

 private:
  [[noreturn]] void error(const std::string& what) {
    throw ParseError(what, XML_GetCurrentLineNumber(parser_),
                     XML_GetCurrentColumnNumber(parser_) + 1);
  }

  void push_attribute(std::string_view tag, std::optional<std::string> key,
                      std::optional<std::string> value) {
    if (!key) error("<" + std::string(tag) + "> attribute without key");
    Attribute a;
    a.key = normalize_key(*key);
    if (tag == "list" || tag == "container") {
      a.value = std::string{};
      a.xml_tag = std::string(tag);
    } else {
      if (!value) error("attribute '" + a.key + "' without value");
      try {
        a.value = typed_value(tag, a.key, *value);
      } catch (const ValueError& e) {
        throw ValueError(std::string(e.what()) + " (line " +
                         std::to_string(XML_GetCurrentLineNumber(parser_)) + ")");
      }
      if (tag == "id") a.xml_tag = "id";
    }
    attribute_stack_.push_back(std::move(a));
  }

  AttributeMap& current_map() {
    Scope scope = scopes_.empty() ? Scope::none : scopes_.back();
    switch (scope) {
      case Scope::log: return log_.attributes;
      case Scope::trace: return log_.traces.back().attributes;
      case Scope::event: return log_.traces.back().events.back().attributes;
      case Scope::global_trace: return log_.global_trace;
      case Scope::global_event: return log_.global_event;
      default: error("attribute in unexpected position");
    }
  }

  XML_Parser parser_;
  EventLog log_;
  bool saw_log_ = false;
  std::vector<Scope> scopes_;
  std::vector<Attribute> attribute_stack_;
};

struct ParserDeleter {
  void operator()(XML_Parser p) const { XML_ParserFree(p); }
};

struct ParseContext {
  XesBuilder* builder;
  std::exception_ptr failure;
  XML_Parser parser;
};

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** atts) {
  auto* ctx = static_cast<ParseContext*>(data);
  if (ctx->failure) return;
  try {
    ctx->builder->start(name, atts);
  } catch (...) {
    ctx->failure = std::current_exception();
    XML_StopParser(ctx->parser, XML_FALSE);
  }
}

void XMLCALL on_end(void* data, const XML_Char* name) {
  auto* ctx = static_cast<ParseContext*>(data);
  if (ctx->failure) return;
  try {
    ctx->builder->end(name);
  } catch (...) {
    ctx->failure = std::current_exception();
    XML_StopParser(ctx->parser, XML_FALSE);
  }
}

}  // namespace

EventLog parse_xes(std::istream& in) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  XesBuilder builder(parser.get());
  ParseContext ctx{&builder, nullptr, parser.get()};
  XML_SetUserData(parser.get(), &ctx);
  XML_SetElementHandler(parser.get(), on_start, on_end);

  std::array<char, 1 << 16> buffer{};
  bool done = false;
  while (!done) {
    in.read(buffer.data(), buffer.size());
    auto got = in.gcount();
    done = got < static_cast<std::streamsize>(buffer.size());
    if (XML_Parse(parser.get(), buffer.data(), static_cast<int>(got), done) == XML_STATUS_ERROR) {
      if (ctx.failure) std::rethrow_exception(ctx.failure);
      throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                       XML_GetCurrentLineNumber(parser.get()),
                       XML_GetCurrentColumnNumber(parser.get()) + 1);
    }
  }
  if (ctx.failure) std::rethrow_exception(ctx.failure);
  EventLog log = builder.take();
  for (const auto& c : log.classifiers)
    for (const auto& k : c.keys)
      if (!log.global_event.contains(k))
        throw ParseError("classifier '" + c.name + "' references key '" + k +
                         "' that is not declared global for events");
  return log;
}

EventLog parse_xes(std::string_view document) {
  std::istringstream in{std::string(document)};
  return parse_xes(in);
}

EventLog read_xes_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_xes(in);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

std::string escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      case '\t': out += "&#9;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_attribute(const Attribute& a, std::ostream& out, int depth) {
  std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  std::string tag;
  std::string value;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          tag = "string";
          value = v;
        } else if constexpr (std::is_same_v<T, Timestamp>) {
          tag = "date";
          value = format_timestamp(v);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          tag = "int";
          value = std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          tag = "float";
          value = format_real(v);
        } else {
          tag = "boolean";
          value = v ? "true" : "false";
        }
      },
      a.value);
  const bool composite = a.xml_tag == "list" || a.xml_tag == "container";
  if (!a.xml_tag.empty()) tag = a.xml_tag;
  out << indent << '<' << tag << " key=\"" << escape(a.key) << '"';
  if (!composite) out << " value=\"" << escape(value) << '"';
  if (a.children.empty() && !composite) {
    out << "/>\n";
    return;
  }
  out << ">\n";
  int child_depth = depth + 1;
  if (a.xml_tag == "list") {
    out << indent << "  <values>\n";
    ++child_depth;
  }
  for (const auto& c : a.children) write_attribute(c, out, child_depth);
  if (a.xml_tag == "list") out << indent << "  </values>\n";
  out << indent << "</" << tag << ">\n";
}

void write_map(const AttributeMap& m, std::ostream& out, int depth) {
  for (const auto& [key, a] : m) write_attribute(a, out, depth);
}

std::string join_classifier_keys(const std::vector<std::string>& keys) {
  std::string out;
  for (const auto& k : keys) {
    if (!out.empty()) out += ' ';
    if (k.find(' ') != std::string::npos)
      out += '\'' + k + '\'';
    else
      out += k;
  }
  return out;
}

}  // namespace

void serialize_xes(const EventLog& log, std::ostream& out) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<log xes.version=\"1.0\" xes.features=\"nested-attributes\">\n";
  for (const auto& e : log.extensions)
    out << "  <extension name=\"" << escape(e.name) << "\" prefix=\"" << escape(e.prefix)
        << "\" uri=\"" << escape(e.uri) << "\"/>\n";
  if (!log.global_trace.empty()) {
    out << "  <global scope=\"trace\">\n";
    write_map(log.global_trace, out, 2);
    out << "  </global>\n";
  }
  if (!log.global_event.empty()) {
    out << "  <global scope=\"event\">\n";
    write_map(log.global_event, out, 2);
    out << "  </global>\n";
  }
  for (const auto& c : log.classifiers)
    out << "  <classifier name=\"" << escape(c.name) << "\" keys=\""
        << escape(join_classifier_keys(c.keys)) << "\"/>\n";
  write_map(log.attributes, out, 1);
  for (const auto& t : log.traces) {
    out << "  <trace>\n";
    write_map(t.attributes, out, 2);
    for (const auto& e : t.events) {
      out << "    <event>\n";
      write_map(e.attributes, out, 3);
      out << "    </event>\n";
    }
    out << "  </trace>\n";
  }
  out << "</log>\n";
}

std::string serialize_xes(const EventLog& log) {
  std::ostringstream out;
  serialize_xes(log, out);
  return out.str();
}

void write_xes_file(const EventLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  serialize_xes(log, out);
  if (!out) throw Error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// sensor change points

EventLog sensor_series_to_log(const std::vector<SensorSeries>& series,
                              std::int64_t day_boundary_seconds, Diagnostics* diagnostics) {
  struct ChangePoint {
    Timestamp time;
    std::size_t sensor;
    std::size_t index;
    bool on;
  };
  std::vector<ChangePoint> points;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& samples = series[s].samples;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      int v = samples[i].value;
      if (v != 0 && v != 1)
        throw ValidationError("sensor '" + series[s].sensor + "' sample " + std::to_string(i) +
                              ": value must be 0 or 1");
      if (i > 0 && v == samples[i - 1].value)
        throw ValidationError("sensor '" + series[s].sensor + "' sample " + std::to_string(i) +
                              ": value does not alternate");
      if (i > 0 && samples[i].time < samples[i - 1].time)
        throw ValidationError("sensor '" + series[s].sensor + "' sample " + std::to_string(i) +
                              ": timestamps out of order");
      points.push_back({samples[i].time, s, i, v == 1});
    }
  }
  std::stable_sort(points.begin(), points.end(), [](const ChangePoint& a, const ChangePoint& b) {
    return a.time < b.time;
  });

  const std::int64_t boundary_ms = day_boundary_seconds * 1000;
  auto day_of = [&](Timestamp t) {
    std::int64_t shifted = t.millis - boundary_ms;
    return shifted >= 0 ? shifted / 86'400'000 : -((-shifted + 86'399'999) / 86'400'000);
  };

  EventLog log;
  for (auto name : {"Concept", "Time", "Lifecycle"}) log.declare_standard_extension(name);
  log.set(keys::concept_name, std::string("sensor change points"));

  std::optional<std::int64_t> current_day;
  std::vector<int> open(series.size(), 0);
  auto close_day = [&]() {
    if (!current_day) return;
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (open[s] > 0)
        note(diagnostics, "trace " + *log.traces.back().text(keys::concept_name) + ": sensor '" +
                              series[s].sensor + "' has a start without complete");
      open[s] = 0;
    }
  };
  for (const auto& p : points) {
    auto day = day_of(p.time);
    if (!current_day || day != *current_day) {
      close_day();
      current_day = day;
      Trace trace;
      Timestamp day_start{day * 86'400'000 + boundary_ms};
      trace.set(keys::concept_name, format_timestamp(day_start).substr(0, 10));
      log.traces.push_back(std::move(trace));
    }
    Event e;
    e.set(keys::concept_name, series[p.sensor].sensor);
    e.set(keys::lifecycle, std::string(p.on ? "start" : "complete"));
    e.set(keys::timestamp, p.time);
    log.traces.back().events.push_back(std::move(e));
    open[p.sensor] = p.on ? 1 : 0;
  }
  close_day();
  return log;
}

std::vector<SensorSeries> read_sensor_csv(std::istream& in) {
  std::vector<SensorSeries> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t row = 0;
  bool header = true;
  auto trim = [](std::string s) {
    auto b = s.find_first_not_of(" \t\r\"");
    auto e = s.find_last_not_of(" \t\r\"");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(trim(cell));
    if (header) {
      header = false;
      if (cols.size() != 3 || lower(cols[0]) != "sensor" || lower(cols[1]) != "timestamp" ||
          lower(cols[2]) != "value")
        throw ValidationError("row 1: expected header 'sensor,timestamp,value'");
      continue;
    }
    if (cols.size() != 3)
      throw ValidationError("row " + std::to_string(row) + ": expected 3 columns, found " +
                            std::to_string(cols.size()));
    SensorSample sample;
    try {
      sample.time = parse_timestamp(cols[1]);
    } catch (const ValueError& e) {
      throw ValidationError("row " + std::to_string(row) + ": " + e.what());
    }
    if (cols[2] != "0" && cols[2] != "1")
      throw ValidationError("row " + std::to_string(row) + ": value must be 0 or 1");
    sample.value = cols[2] == "1" ? 1 : 0;
    auto [it, inserted] = index.try_emplace(cols[0], out.size());
    if (inserted) out.push_back({cols[0], {}});
    out[it->second].samples.push_back(sample);
  }
  if (header) throw ValidationError("row 1: missing header");
  for (auto& s : out)
    std::stable_sort(s.samples.begin(), s.samples.end(),
                     [](const SensorSample& a, const SensorSample& b) { return a.time < b.time; });
  return out;
}

}  // namespace evabs::xes
