#include "denis/error.hpp"

namespace denis {

std::string_view reason_of(Errc code) noexcept {
  switch (code) {
    case Errc::config: return "config";
    case Errc::validation: return "validation";
    case Errc::slice_capacity: return "slice-capacity";
    case Errc::channel_conflict: return "channel-conflict";
    case Errc::channel_range: return "channel-range";
    case Errc::lookup: return "lookup";
    case Errc::route_unavailable: return "route-unavailable";
    case Errc::consistency: return "consistency";
  }
  return "unknown";
}

}  // namespace denis
