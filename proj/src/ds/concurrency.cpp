// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/ds/concurrency.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "pgaslab/error.hpp"

namespace pgaslab::ds {

std::string_view to_string(ConcurrencyLevel level) noexcept {
  switch (level) {
    case ConcurrencyLevel::CRW: return "CRW";
    case ConcurrencyLevel::CW: return "CW";
    case ConcurrencyLevel::CR: return "CR";
    case ConcurrencyLevel::CLOCAL: return "CLOCAL";
  }
  return "?";
}

ConcurrencyLevel parse_level(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  if (upper == "CRW") return ConcurrencyLevel::CRW;
  if (upper == "CW") return ConcurrencyLevel::CW;
  if (upper == "CR") return ConcurrencyLevel::CR;
  if (upper == "CLOCAL") return ConcurrencyLevel::CLOCAL;
  throw ArgumentError("unknown concurrency level '" + std::string(text) + "'");
}

}  // namespace pgaslab::ds
