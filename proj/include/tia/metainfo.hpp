/**
 * @file metainfo.hpp
 * @brief tiaMetaInfo document: data model, XML parser/serializer and validation.
 *
 * Canonical attribute names are samplingRate and surname. The spellings
 * sampleRate and lastName are accepted on input with a warning. The signal
 * type "buttons" is accepted as an alias for "button".
 */

#ifndef TIA_METAINFO_HPP_
#define TIA_METAINFO_HPP_

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tia/detail/xml.hpp"
#include "tia/error.hpp"
#include "tia/signal_registry.hpp"

namespace tia {

enum class Sex { kMale, kFemale };
enum class Handedness { kLeft, kRight };

struct Subject {
  std::optional<std::string> id;
  std::optional<std::string> first_name;
  std::optional<std::string> surname;
  std::optional<Sex> sex;
  std::optional<std::chrono::year_month_day> birthday;
  std::optional<Handedness> handedness;
  std::optional<bool> medication;
  std::optional<bool> glasses;
  std::optional<bool> smoker;

  friend bool operator==(const Subject&, const Subject&) = default;
};

struct MasterSignal {
  float sampling_rate = 0.0f;  ///< Hz
  std::uint32_t block_size = 1;

  friend bool operator==(const MasterSignal&, const MasterSignal&) = default;
};

struct Channel {
  std::uint32_t nr = 1;  ///< 1-based
  std::string label;

  friend bool operator==(const Channel&, const Channel&) = default;
};

struct SignalInfo {
  SignalType signal_type;
  float sampling_rate = 0.0f;  ///< Hz
  std::uint32_t block_size = 0;
  std::uint32_t num_channels = 0;
  std::vector<Channel> channels;  ///< labeled channels only, in document order

  const Channel* channel(std::uint32_t nr) const noexcept {
    for (const auto& c : channels) {
      if (c.nr == nr) return &c;
    }
    return nullptr;
  }

  friend bool operator==(const SignalInfo&, const SignalInfo&) = default;
};

struct MetaInfo {
  std::string version{"1.0"};
  std::optional<Subject> subject;
  std::optional<MasterSignal> master_signal;
  std::vector<SignalInfo> signals;

  const SignalInfo* find(std::uint32_t flag) const noexcept {
    for (const auto& s : signals) {
      if (s.signal_type.flag == flag) return &s;
    }
    return nullptr;
  }

  friend bool operator==(const MetaInfo&, const MetaInfo&) = default;
};

namespace detail {

[[noreturn]] inline void schema_error(const std::string& what) { throw Error(Errc::kSchemaViolation, what); }

inline std::string format_float(float v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline float parse_float_attr(std::string_view name, std::string_view text) {
  float v = 0.0f;
  std::string_view t = text;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
    schema_error("attribute " + std::string(name) + " is not a finite float: '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint32_t parse_uint_attr(std::string_view name, std::string_view text) {
  std::uint32_t v = 0;
  std::string_view t = text;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    schema_error("attribute " + std::string(name) + " is not a non-negative integer: '" + std::string(text) + "'");
  }
  return v;
}

inline bool parse_bool_attr(std::string_view name, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  schema_error("attribute " + std::string(name) + " is not a boolean: '" + std::string(text) + "'");
}

inline std::chrono::year_month_day parse_date_attr(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  const auto digits = [&](std::size_t from, std::size_t n) {
    for (std::size_t i = from; i < from + n; ++i) {
      if (i >= text.size() || text[i] < '0' || text[i] > '9') return false;
    }
    return true;
  };
  if (text.size() != 10 || !digits(0, 4) || text[4] != '-' || !digits(5, 2) || text[7] != '-' || !digits(8, 2)) {
    schema_error("birthday is not a date of the form YYYY-MM-DD: '" + std::string(text) + "'");
  }
  std::from_chars(text.data(), text.data() + 4, y);
  std::from_chars(text.data() + 5, text.data() + 7, m);
  std::from_chars(text.data() + 8, text.data() + 10, d);
  const std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) schema_error("birthday is not a valid calendar date: '" + std::string(text) + "'");
  return date;
}

inline std::string format_date(const std::chrono::year_month_day& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                static_cast<unsigned>(date.day()));
  return buf;
}

/// Attribute reader that tracks which attributes were consumed and records alias use.
class AttributeReader {
 public:
  AttributeReader(const XmlElement& el, std::vector<std::string>* warnings) : el_(el), warnings_(warnings) {}

  const std::string* get(std::string_view name, std::string_view alias = {}) {
    const std::string* v = el_.attribute(name);
    if (v != nullptr) used_.insert(std::string(name));
    if (!alias.empty()) {
      if (const std::string* a = el_.attribute(alias)) {
        used_.insert(std::string(alias));
        if (v == nullptr) {
          warn("element " + el_.name + " uses '" + std::string(alias) + "' for '" + std::string(name) + "'");
          v = a;
        } else {
          warn("element " + el_.name + " has both '" + std::string(name) + "' and '" + std::string(alias) +
               "'; using '" + std::string(name) + "'");
        }
      }
    }
    return v;
  }

  const std::string& require(std::string_view name, std::string_view alias = {}) {
    const std::string* v = get(name, alias);
    if (v == nullptr) schema_error("element " + el_.name + " is missing required attribute " + std::string(name));
    return *v;
  }

  void finish() {
    for (const auto& [k, v] : el_.attributes) {
      if (!used_.contains(k)) warn("element " + el_.name + " has unknown attribute '" + k + "'");
    }
  }

 private:
  void warn(std::string w) {
    if (warnings_ != nullptr) warnings_->push_back(std::move(w));
  }

  const XmlElement& el_;
  std::vector<std::string>* warnings_;
  std::set<std::string, std::less<>> used_;
};

inline Subject parse_subject(const XmlElement& el, std::vector<std::string>* warnings) {
  if (!el.children.empty()) schema_error("subject must not have child elements");
  AttributeReader attrs(el, warnings);
  Subject s;
  if (auto* v = attrs.get("id")) s.id = *v;
  if (auto* v = attrs.get("firstName")) s.first_name = *v;
  if (auto* v = attrs.get("surname", "lastName")) s.surname = *v;
  if (auto* v = attrs.get("sex")) {
    if (*v == "m") {
      s.sex = Sex::kMale;
    } else if (*v == "f") {
      s.sex = Sex::kFemale;
    } else {
      schema_error("sex must be 'm' or 'f', got '" + *v + "'");
    }
  }
  if (auto* v = attrs.get("birthday")) s.birthday = parse_date_attr(*v);
  if (auto* v = attrs.get("handedness")) {
    if (*v == "l") {
      s.handedness = Handedness::kLeft;
    } else if (*v == "r") {
      s.handedness = Handedness::kRight;
    } else {
      schema_error("handedness must be 'l' or 'r', got '" + *v + "'");
    }
  }
  if (auto* v = attrs.get("medication")) s.medication = parse_bool_attr("medication", *v);
  if (auto* v = attrs.get("glasses")) s.glasses = parse_bool_attr("glasses", *v);
  if (auto* v = attrs.get("smoker")) s.smoker = parse_bool_attr("smoker", *v);
  attrs.finish();
  return s;
}

inline MasterSignal parse_master(const XmlElement& el, std::vector<std::string>* warnings) {
  if (!el.children.empty()) schema_error("masterSignal must not have child elements");
  AttributeReader attrs(el, warnings);
  MasterSignal m;
  m.sampling_rate = parse_float_attr("samplingRate", attrs.require("samplingRate", "sampleRate"));
  m.block_size = parse_uint_attr("blockSize", attrs.require("blockSize"));
  attrs.finish();
  if (!(m.sampling_rate > 0.0f)) schema_error("masterSignal samplingRate must be positive");
  if (m.block_size < 1) schema_error("masterSignal blockSize must be at least 1");
  return m;
}

inline const SignalType& metainfo_signal_type(std::string_view identifier) {
  if (identifier == "buttons") return signal_type("button");
  try {
    return signal_type(identifier);
  } catch (const Error&) {
    schema_error("unknown signal type '" + std::string(identifier) + "'");
  }
}

inline void check_channels(const SignalInfo& s) {
  std::set<std::uint32_t> seen;
  for (const auto& c : s.channels) {
    if (!seen.insert(c.nr).second) {
      throw Error(Errc::kDuplicateChannel, "signal " + std::string(s.signal_type.identifier) + " lists channel " +
                                               std::to_string(c.nr) + " more than once");
    }
    if (c.nr < 1 || c.nr > s.num_channels) {
      schema_error("signal " + std::string(s.signal_type.identifier) + " channel nr " + std::to_string(c.nr) +
                   " is outside 1.." + std::to_string(s.num_channels));
    }
  }
}

inline SignalInfo parse_signal(const XmlElement& el, std::vector<std::string>* warnings) {
  AttributeReader attrs(el, warnings);
  SignalInfo s;
  s.signal_type = metainfo_signal_type(attrs.require("type"));
  s.sampling_rate = parse_float_attr("samplingRate", attrs.require("samplingRate", "sampleRate"));
  s.block_size = parse_uint_attr("blockSize", attrs.require("blockSize"));
  s.num_channels = parse_uint_attr("numChannels", attrs.require("numChannels"));
  attrs.finish();
  if (s.sampling_rate < 0.0f) schema_error("signal samplingRate must not be negative");
  for (const auto& child : el.children) {
    if (child.name != "channel") schema_error("unexpected element " + child.name + " inside signal");
    if (!child.children.empty()) schema_error("channel must not have child elements");
    AttributeReader ca(child, warnings);
    Channel c;
    c.nr = parse_uint_attr("nr", ca.require("nr"));
    c.label = ca.require("label");
    ca.finish();
    s.channels.push_back(std::move(c));
  }
  check_channels(s);
  return s;
}

}  // namespace detail

/**
 * Parses a tiaMetaInfo document. Alias attribute names and unknown attributes
 * are reported through `warnings` when it is non-null.
 */
inline MetaInfo parse_metainfo(std::string_view xml, std::vector<std::string>* warnings = nullptr) {
  const detail::XmlElement root = detail::parse_xml(xml);
  if (root.name != "tiaMetaInfo") detail::schema_error("expected root element tiaMetaInfo, found " + root.name);
  const std::string* version = root.attribute("version");
  if (version == nullptr) throw Error(Errc::kVersionMismatch, "tiaMetaInfo has no version attribute");
  if (*version != "1.0") throw Error(Errc::kVersionMismatch, "tiaMetaInfo version " + *version + " is not 1.0");

  MetaInfo info;
  for (const auto& child : root.children) {
    if (child.name == "subject") {
      if (info.subject) detail::schema_error("more than one subject element");
      info.subject = detail::parse_subject(child, warnings);
    } else if (child.name == "masterSignal") {
      if (info.master_signal) detail::schema_error("more than one masterSignal element");
      info.master_signal = detail::parse_master(child, warnings);
    } else if (child.name == "signal") {
      info.signals.push_back(detail::parse_signal(child, warnings));
    } else {
      detail::schema_error("unexpected element " + child.name + " inside tiaMetaInfo");
    }
  }
  return info;
}

/// Compact UTF-8 document with an XML declaration and canonical attribute names.
inline std::string serialize_metainfo(const MetaInfo& info) {
  using detail::escape_attribute;
  if (info.version != "1.0") throw Error(Errc::kVersionMismatch, "tiaMetaInfo version must be 1.0");

  std::string out = R"(<?xml version="1.0" encoding="UTF-8"?><tiaMetaInfo version="1.0">)";
  const auto attr = [&out](std::string_view name, std::string_view value) {
    out += ' ';
    out += name;
    out += "=\"";
    out += escape_attribute(value);
    out += '"';
  };
  const auto bool_text = [](bool b) { return b ? "true" : "false"; };

  if (const auto& s = info.subject) {
    out += "<subject";
    if (s->id) attr("id", *s->id);
    if (s->first_name) attr("firstName", *s->first_name);
    if (s->surname) attr("surname", *s->surname);
    if (s->sex) attr("sex", *s->sex == Sex::kMale ? "m" : "f");
    if (s->birthday) {
      if (!s->birthday->ok()) throw Error(Errc::kInvariantViolation, "subject birthday is not a valid date");
      attr("birthday", detail::format_date(*s->birthday));
    }
    if (s->handedness) attr("handedness", *s->handedness == Handedness::kLeft ? "l" : "r");
    if (s->medication) attr("medication", bool_text(*s->medication));
    if (s->glasses) attr("glasses", bool_text(*s->glasses));
    if (s->smoker) attr("smoker", bool_text(*s->smoker));
    out += "/>";
  }
  if (const auto& m = info.master_signal) {
    if (!(m->sampling_rate > 0.0f) || !std::isfinite(m->sampling_rate) || m->block_size < 1) {
      throw Error(Errc::kInvariantViolation, "masterSignal needs a positive samplingRate and blockSize");
    }
    out += "<masterSignal";
    attr("samplingRate", detail::format_float(m->sampling_rate));
    attr("blockSize", std::to_string(m->block_size));
    out += "/>";
  }
  for (const auto& s : info.signals) {
    try {
      detail::check_channels(s);
    } catch (const Error& e) {
      throw Error(e.code() == Errc::kDuplicateChannel ? e.code() : Errc::kInvariantViolation, e.what());
    }
    if (!(s.sampling_rate >= 0.0f) || !std::isfinite(s.sampling_rate)) {
      throw Error(Errc::kInvariantViolation, "signal samplingRate must be finite and non-negative");
    }
    out += "<signal";
    attr("type", identifier_of(s.signal_type.flag));
    attr("samplingRate", detail::format_float(s.sampling_rate));
    attr("blockSize", std::to_string(s.block_size));
    attr("numChannels", std::to_string(s.num_channels));
    if (s.channels.empty()) {
      out += "/>";
      continue;
    }
    out += '>';
    for (const auto& c : s.channels) {
      out += "<channel";
      attr("nr", std::to_string(c.nr));
      attr("label", c.label);
      out += "/>";
    }
    out += "</signal>";
  }
  out += "</tiaMetaInfo>";
  return out;
}

/**
 * Cross-checks a model against single-packet framing: every packet carries one
 * master block interval, so each periodic signal must satisfy
 * samplingRate / blockSize == master samplingRate / master blockSize.
 * Aperiodic signals are exempt from the ratio rule. Returns one message per
 * violation; an empty result means the model can drive a data stream.
 */
inline std::vector<std::string> validate_stream_consistency(const MetaInfo& info) {
  std::vector<std::string> violations;
  std::set<std::uint32_t> seen;
  for (const auto& s : info.signals) {
    const std::string name(s.signal_type.identifier);
    if (!seen.insert(s.signal_type.flag).second) violations.push_back("signal " + name + " is listed more than once");
    if (s.num_channels > 0xFFFF) violations.push_back("signal " + name + " has more than 65535 channels");
    if (s.block_size > 0xFFFF) violations.push_back("signal " + name + " has a block size above 65535");
    if (s.signal_type.aperiodic) continue;
    if (s.block_size == 0) {
      violations.push_back("periodic signal " + name + " has block size 0");
      continue;
    }
    if (!info.master_signal) {
      violations.push_back("periodic signal " + name + " cannot be checked without a master signal");
      continue;
    }
    const double lhs = double{s.sampling_rate} * info.master_signal->block_size;
    const double rhs = double{info.master_signal->sampling_rate} * s.block_size;
    if (std::abs(lhs - rhs) > 1e-6 * std::max(std::abs(lhs), std::abs(rhs))) {
      violations.push_back("signal " + name + " produces " + std::to_string(s.sampling_rate / s.block_size) +
                           " blocks/s but the master signal produces " +
                           std::to_string(info.master_signal->sampling_rate / info.master_signal->block_size));
    }
  }
  return violations;
}

}  // namespace tia

#endif  // TIA_METAINFO_HPP_
