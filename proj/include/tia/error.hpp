/**
 * @file error.hpp
 * @brief Error type shared by every TiA component.
 */

#ifndef TIA_ERROR_HPP_
#define TIA_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace tia {

enum class Errc {
  // signal registry
  kUnknownIdentifier,
  kUnknownFlag,
  kMultipleBits,
  kInvalidMask,
  // data packets
  kBadVersion,
  kReservedVersion,
  kTruncated,
  kSizeMismatch,
  kPacketTooLarge,
  kInvariantViolation,
  kOverflow,
  // control messages
  kBadVersionLine,
  kUnknownCommand,
  kBadHeader,
  kBadContentLength,
  kLineTooLong,
  kEndOfStream,
  kUnsupportedVersion,
  // xml documents
  kMalformedXml,
  kSchemaViolation,
  kVersionMismatch,
  kDuplicateChannel,
  // runtime
  kProtocolViolation,
  kServerError,
  kIo,
  kTimeout,
  kConfig,
  kInvalidArgument,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::kUnknownIdentifier: return "unknown-identifier";
    case Errc::kUnknownFlag: return "unknown-flag";
    case Errc::kMultipleBits: return "multiple-bits";
    case Errc::kInvalidMask: return "invalid-mask";
    case Errc::kBadVersion: return "bad-version";
    case Errc::kReservedVersion: return "reserved-version";
    case Errc::kTruncated: return "truncated";
    case Errc::kSizeMismatch: return "size-mismatch";
    case Errc::kPacketTooLarge: return "packet-too-large";
    case Errc::kInvariantViolation: return "invariant-violation";
    case Errc::kOverflow: return "overflow";
    case Errc::kBadVersionLine: return "bad-version-line";
    case Errc::kUnknownCommand: return "unknown-command";
    case Errc::kBadHeader: return "bad-header";
    case Errc::kBadContentLength: return "bad-content-length";
    case Errc::kLineTooLong: return "line-too-long";
    case Errc::kEndOfStream: return "end-of-stream";
    case Errc::kUnsupportedVersion: return "unsupported-version";
    case Errc::kMalformedXml: return "malformed-xml";
    case Errc::kSchemaViolation: return "schema-violation";
    case Errc::kVersionMismatch: return "version-mismatch";
    case Errc::kDuplicateChannel: return "duplicate-channel";
    case Errc::kProtocolViolation: return "protocol-violation";
    case Errc::kServerError: return "server-error";
    case Errc::kIo: return "io";
    case Errc::kTimeout: return "timeout";
    case Errc::kConfig: return "config";
    case Errc::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tia

#endif  // TIA_ERROR_HPP_
