// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pgaslab::util {

// Fixed-point rendering, locale-independent: format_fixed(10.7, 3) == "10.700".
std::string format_fixed(double value, int decimals);

// Space-padded columns separated by two spaces, one line per row. The first
// `left_columns` columns are left-aligned, the rest right-aligned.
std::string aligned_table(const std::vector<std::vector<std::string>>& rows, std::size_t left_columns);

}  // namespace pgaslab::util
