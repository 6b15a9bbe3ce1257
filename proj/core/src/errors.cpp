#include "mixprompt/errors.hpp"

namespace mixprompt {

const char* to_string(ParseErrorKind kind) noexcept {
  switch (kind) {
    case ParseErrorKind::kNoLabel:
      return "no_label";
    case ParseErrorKind::kUnknownLabel:
      return "unknown_label";
    case ParseErrorKind::kEmptyText:
      return "empty_text";
  }
  return "unknown";
}

const char* to_string(BackendErrorKind kind) noexcept {
  switch (kind) {
    case BackendErrorKind::kTransport:
      return "transport";
    case BackendErrorKind::kRateLimited:
      return "rate_limited";
    case BackendErrorKind::kServer:
      return "server";
    case BackendErrorKind::kAuth:
      return "auth";
    case BackendErrorKind::kBadRequest:
      return "bad_request";
    case BackendErrorKind::kProtocol:
      return "protocol";
  }
  return "unknown";
}

}  // namespace mixprompt
