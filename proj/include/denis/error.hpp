#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace denis {

/// Failure categories. Each maps to a stable, machine-readable reason string
/// that the northbound API reports verbatim.
enum class Errc {
  config,          // bad parameter (spacing, interval, rate, ...)
  validation,      // plan structurally invalid
  slice_capacity,  // more than 16 physical slices
  channel_conflict,
  channel_range,
  lookup,          // unknown node / slice id
  route_unavailable,
  consistency,     // flow rule inconsistent with the graph
};

std::string_view reason_of(Errc code) noexcept;

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view reason() const noexcept { return reason_of(code_); }

private:
  Errc code_;
};

}  // namespace denis
