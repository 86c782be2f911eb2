// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgaslab/bench/record.hpp"
#include "pgaslab/ds/concurrency.hpp"
#include "pgaslab/sim/latency.hpp"

namespace pgaslab::costmodel {

// W put, R get, A_CAS / A_FAO single atomics, A_CAS_P persistent CAS
// (expected_attempts x A_CAS), AM_RT active-message round trip, LOCAL one
// host-local operation.
enum class Symbol { W, R, A_CAS, A_FAO, A_CAS_P, AM_RT, LOCAL };

std::string_view to_string(Symbol s) noexcept;

struct ComponentCost {
  Symbol symbol = Symbol::W;
  double count = 1.0;
  // Only meaningful for A_CAS_P; best case is a single attempt.
  double expected_attempts = 1.0;
};

// Best-case cost of one data-structure method at one concurrency level.
// Active-message and checksum variants carry no ConcurrencyLevel.
struct CostFormula {
  std::string family;   // ht_insert, ht_find, q_push, q_pop
  std::string variant;  // CRW, CW, CR, CLOCAL, AM, checksum
  std::optional<ds::ConcurrencyLevel> level;
  std::string description;
  std::vector<ComponentCost> terms;
  // True for the RDMA concurrency-promise rows; false for AM and checksum.
  bool core = true;

  std::string key() const { return family + ":" + variant; }
};

// "A_CAS + W + A_FAO"; counts other than 1 print as "2*W".
std::string to_string(const CostFormula& f);

// Returns a copy with every A_CAS_P term set to `attempts` (>= 1, else
// ArgumentError). Used to feed measured attempt counts back into a prediction.
CostFormula with_attempts(CostFormula f, double attempts);

// Nanoseconds per symbol. A_CAS_P is never stored: it resolves through A_CAS.
using LatencyTable = std::map<Symbol, double>;

// The four one-sided component costs at their default values.
LatencyTable table_one();
// Every symbol from a latency configuration; AM_RT = 2 am_oneway + handler.
LatencyTable latency_table(const sim::LatencyConfig& config);
LatencyTable scaled(const LatencyTable& table, double factor);

// Sum of count x latency over the terms. Throws ConfigError when a term's
// symbol is absent from `table`, and ArgumentError for a non-positive count
// or expected_attempts below 1.
double predict(const CostFormula& f, const LatencyTable& table);
double predict(const CostFormula& f, const sim::LatencyConfig& config);
bool covers(const CostFormula& f, const LatencyTable& table) noexcept;

// Built-in formulas in declaration order: every RDMA hash and queue row,
// then the active-message variants and the checksummed queue variants.
const std::vector<CostFormula>& registry();
// Throws ConfigError for an unknown key.
const CostFormula& formula(std::string_view family, std::string_view variant);
const CostFormula* find_formula(std::string_view family, std::string_view variant) noexcept;

enum class VariantSet { core, all };

struct RankedVariant {
  std::string family;
  std::string variant;
  double predicted_ns = 0.0;
};

// Variants of `family` sorted by predicted cost, ties in declaration order.
// Variants whose symbols are missing from `table` are left out. The family
// "hash" spans ht_insert and ht_find. Throws ArgumentError for an unknown
// family.
std::vector<RankedVariant> rank_variants(std::string_view family, const LatencyTable& table,
                                         VariantSet set = VariantSet::all);

struct Prediction {
  std::string family;
  std::string variant;
  double predicted_ns = 0.0;
};

// Every registry entry that `table` covers.
std::vector<Prediction> predictions(const LatencyTable& table);

struct DeviationRow {
  std::string workload;
  std::string variant;
  int procs = 1;
  double predicted_ns = 0.0;
  double measured_ns = 0.0;
  double ratio = 0.0;
  bool flagged = false;
};

struct DeviationReport {
  std::vector<DeviationRow> rows;
  // "workload:variant" of measurements with no matching prediction.
  std::vector<std::string> unmatched;
};

inline constexpr double default_flag_threshold = 1.25;

// ratio = measured / predicted, flagged when ratio > threshold. A zero
// prediction gives ratio 1 for a zero measurement and +inf otherwise.
DeviationReport deviation_report(const std::vector<Prediction>& predicted,
                                 const std::vector<bench::BenchRecord>& measured,
                                 double threshold = default_flag_threshold);

std::string to_csv(const DeviationReport& report);
std::string to_table(const DeviationReport& report);

}  // namespace pgaslab::costmodel
