#ifndef TIA_DETAIL_XML_HPP_
#define TIA_DETAIL_XML_HPP_

#include <expat.h>

#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tia/error.hpp"

namespace tia::detail {

/// Minimal element tree built on expat. Comments and processing instructions are dropped.
struct XmlElement {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<XmlElement> children;
  std::string text;

  const std::string* attribute(std::string_view key) const noexcept {
    for (const auto& [k, v] : attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

namespace xml_impl {

struct BuildState {
  XML_Parser parser = nullptr;
  XmlElement root;
  std::vector<XmlElement*> stack;
  bool has_root = false;
  std::string failure;
};

inline void on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto* st = static_cast<BuildState*>(user);
  XmlElement el;
  el.name = name;
  for (std::size_t i = 0; attrs[i] != nullptr; i += 2) el.attributes.emplace_back(attrs[i], attrs[i + 1]);
  if (st->stack.empty()) {
    st->root = std::move(el);
    st->has_root = true;
    st->stack.push_back(&st->root);
  } else {
    auto& kids = st->stack.back()->children;
    kids.push_back(std::move(el));
    st->stack.push_back(&kids.back());
  }
}

inline void on_end(void* user, const XML_Char*) {
  static_cast<BuildState*>(user)->stack.pop_back();
}

inline void on_text(void* user, const XML_Char* s, int len) {
  auto* st = static_cast<BuildState*>(user);
  if (!st->stack.empty()) st->stack.back()->text.append(s, static_cast<std::size_t>(len));
}

inline void on_doctype(void* user, const XML_Char*, const XML_Char*, const XML_Char*, int) {
  auto* st = static_cast<BuildState*>(user);
  st->failure = "document type declarations are not accepted";
  XML_StopParser(st->parser, XML_FALSE);
}

struct ParserDeleter {
  void operator()(XML_ParserStruct* p) const noexcept { XML_ParserFree(p); }
};

}  // namespace xml_impl

inline XmlElement parse_xml(std::string_view document) {
  std::unique_ptr<XML_ParserStruct, xml_impl::ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) throw Error(Errc::kMalformedXml, "cannot allocate XML parser");
  xml_impl::BuildState state;
  state.parser = parser.get();
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), xml_impl::on_start, xml_impl::on_end);
  XML_SetCharacterDataHandler(parser.get(), xml_impl::on_text);
  XML_SetStartDoctypeDeclHandler(parser.get(), xml_impl::on_doctype);

  // Element pointers on the stack are stable: a parent's children vector only
  // grows while that parent is on top of the stack.
  if (document.size() > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw Error(Errc::kMalformedXml, "XML document too large");
  }
  const auto status = XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE);
  if (!state.failure.empty()) throw Error(Errc::kMalformedXml, state.failure);
  if (status != XML_STATUS_OK) {
    throw Error(Errc::kMalformedXml, std::string("XML error at line ") +
                                         std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
                                         XML_ErrorString(XML_GetErrorCode(parser.get())));
  }
  if (!state.has_root) throw Error(Errc::kMalformedXml, "XML document has no root element");
  return std::move(state.root);
}

/// Escapes text for use inside a double-quoted attribute value.
inline std::string escape_attribute(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\t': out += "&#9;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          throw Error(Errc::kInvariantViolation, "control characters cannot be represented in XML 1.0");
        }
        out += c;
    }
  }
  return out;
}

}  // namespace tia::detail

#endif  // TIA_DETAIL_XML_HPP_
