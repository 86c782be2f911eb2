// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace pgaslab::ds {

// Promise made by a phase about which operations may run concurrently:
// reads and writes (CRW), only writes (CW), only reads (CR), or only the
// host rank touching its own structure (CLOCAL). Phases are separated by a
// fabric barrier.
enum class ConcurrencyLevel { CRW, CW, CR, CLOCAL };

std::string_view to_string(ConcurrencyLevel level) noexcept;
// Accepts "CRW", "CW", "CR", "CLOCAL" (case-insensitive). Throws ArgumentError.
ConcurrencyLevel parse_level(std::string_view text);

}  // namespace pgaslab::ds
