// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/costmodel/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "pgaslab/error.hpp"
#include "pgaslab/util/format.hpp"

namespace pgaslab::costmodel {

namespace {

using ds::ConcurrencyLevel;

ComponentCost term(Symbol s) { return ComponentCost{s, 1.0, 1.0}; }

CostFormula rdma(std::string family, ConcurrencyLevel level, std::string description, std::vector<ComponentCost> terms) {
  std::string variant(ds::to_string(level));
  return CostFormula{std::move(family), std::move(variant), level, std::move(description), std::move(terms), true};
}

CostFormula extension(std::string family, std::string variant, std::string description,
                      std::vector<ComponentCost> terms) {
  return CostFormula{std::move(family), std::move(variant), std::nullopt, std::move(description), std::move(terms),
                     false};
}

std::vector<CostFormula> build_registry() {
  using enum Symbol;
  return {
      rdma("ht_insert", ConcurrencyLevel::CRW, "fully atomic insert", {term(A_CAS), term(W), term(A_FAO)}),
      rdma("ht_insert", ConcurrencyLevel::CW, "phasal insertions", {term(A_CAS), term(W)}),
      rdma("ht_find", ConcurrencyLevel::CRW, "fully atomic find", {term(A_FAO), term(R), term(A_FAO)}),
      rdma("ht_find", ConcurrencyLevel::CR, "phasal finds", {term(R)}),
      rdma("q_push", ConcurrencyLevel::CRW, "fully atomic push", {term(A_FAO), term(W), term(A_CAS_P)}),
      rdma("q_push", ConcurrencyLevel::CW, "only pushes", {term(A_FAO), term(W)}),
      rdma("q_push", ConcurrencyLevel::CLOCAL, "local push", {term(LOCAL)}),
      rdma("q_pop", ConcurrencyLevel::CRW, "fully atomic pop", {term(A_FAO), term(R), term(A_CAS_P)}),
      rdma("q_pop", ConcurrencyLevel::CR, "only pops", {term(A_FAO), term(R)}),
      rdma("q_pop", ConcurrencyLevel::CLOCAL, "local pop", {term(LOCAL)}),
      extension("ht_insert", "AM", "active-message insert", {term(AM_RT)}),
      extension("ht_find", "AM", "active-message find", {term(AM_RT)}),
      extension("q_push", "AM", "active-message push", {term(AM_RT)}),
      extension("q_pop", "AM", "active-message pop", {term(AM_RT)}),
      extension("q_push", "checksum", "checksummed push", {term(A_FAO), term(W)}),
      extension("q_pop", "checksum", "checksum-validated pop", {term(A_FAO), term(R), term(A_CAS_P)}),
  };
}

Symbol lookup_symbol(Symbol s) noexcept { return s == Symbol::A_CAS_P ? Symbol::A_CAS : s; }

void check_term(const ComponentCost& t) {
  if (!(t.count > 0.0)) throw ArgumentError("cost term count must be positive");
  if (t.symbol == Symbol::A_CAS_P && !(t.expected_attempts >= 1.0)) {
    throw ArgumentError("persistent CAS expected_attempts must be >= 1");
  }
}

bool in_family(const CostFormula& f, std::string_view family) {
  if (family == "hash") return f.family == "ht_insert" || f.family == "ht_find";
  return f.family == family;
}

// Integral values print without decimals.
std::string number(double v) { return util::format_fixed(v, std::floor(v) == v ? 0 : 3); }

std::string measured_key(const bench::BenchRecord& r) { return r.workload + ":" + r.variant; }

}  // namespace

std::string_view to_string(Symbol s) noexcept {
  switch (s) {
    case Symbol::W: return "W";
    case Symbol::R: return "R";
    case Symbol::A_CAS: return "A_CAS";
    case Symbol::A_FAO: return "A_FAO";
    case Symbol::A_CAS_P: return "A_CAS_P";
    case Symbol::AM_RT: return "AM_RT";
    case Symbol::LOCAL: return "l";
  }
  return "?";
}

std::string to_string(const CostFormula& f) {
  std::string out;
  for (const auto& t : f.terms) {
    if (!out.empty()) out += " + ";
    if (t.count != 1.0) out += number(t.count) + "*";
    out += to_string(t.symbol);
    if (t.symbol == Symbol::A_CAS_P && t.expected_attempts != 1.0) {
      out += "(" + number(t.expected_attempts) + ")";
    }
  }
  return out;
}

CostFormula with_attempts(CostFormula f, double attempts) {
  if (!(attempts >= 1.0)) throw ArgumentError("persistent CAS expected_attempts must be >= 1");
  for (auto& t : f.terms) {
    if (t.symbol == Symbol::A_CAS_P) t.expected_attempts = attempts;
  }
  return f;
}

LatencyTable table_one() {
  const auto d = sim::LatencyConfig::defaults();
  return {{Symbol::W, static_cast<double>(d.put.count())},
          {Symbol::R, static_cast<double>(d.get.count())},
          {Symbol::A_CAS, static_cast<double>(d.cas.count())},
          {Symbol::A_FAO, static_cast<double>(d.fao.count())}};
}

LatencyTable latency_table(const sim::LatencyConfig& c) {
  const auto ns = [](sim::Duration d) { return static_cast<double>(d.count()); };
  return {{Symbol::W, ns(c.put)},
          {Symbol::R, ns(c.get)},
          {Symbol::A_CAS, ns(c.cas)},
          {Symbol::A_FAO, ns(c.fao)},
          {Symbol::AM_RT, 2.0 * ns(c.am_oneway) + ns(c.handler_cost())},
          {Symbol::LOCAL, ns(c.local_op)}};
}

LatencyTable scaled(const LatencyTable& table, double factor) {
  LatencyTable out;
  for (const auto& [s, v] : table) out[s] = v * factor;
  return out;
}

bool covers(const CostFormula& f, const LatencyTable& table) noexcept {
  return std::all_of(f.terms.begin(), f.terms.end(),
                     [&](const ComponentCost& t) { return table.contains(lookup_symbol(t.symbol)); });
}

double predict(const CostFormula& f, const LatencyTable& table) {
  double total = 0.0;
  for (const auto& t : f.terms) {
    check_term(t);
    const auto it = table.find(lookup_symbol(t.symbol));
    if (it == table.end()) {
      throw ConfigError("latency table has no value for " + std::string(to_string(lookup_symbol(t.symbol))) +
                        " needed by " + f.key());
    }
    const double attempts = t.symbol == Symbol::A_CAS_P ? t.expected_attempts : 1.0;
    total += t.count * attempts * it->second;
  }
  return total;
}

double predict(const CostFormula& f, const sim::LatencyConfig& config) { return predict(f, latency_table(config)); }

const std::vector<CostFormula>& registry() {
  static const std::vector<CostFormula> formulas = build_registry();
  return formulas;
}

const CostFormula* find_formula(std::string_view family, std::string_view variant) noexcept {
  for (const auto& f : registry()) {
    if (f.family == family && f.variant == variant) return &f;
  }
  return nullptr;
}

const CostFormula& formula(std::string_view family, std::string_view variant) {
  if (const auto* f = find_formula(family, variant)) return *f;
  throw ConfigError("no cost formula for " + std::string(family) + ":" + std::string(variant));
}

std::vector<RankedVariant> rank_variants(std::string_view family, const LatencyTable& table, VariantSet set) {
  std::vector<RankedVariant> out;
  bool known = false;
  for (const auto& f : registry()) {
    if (!in_family(f, family)) continue;
    known = true;
    if (set == VariantSet::core && !f.core) continue;
    if (!covers(f, table)) continue;
    out.push_back({f.family, f.variant, predict(f, table)});
  }
  if (!known) throw ArgumentError("unknown operation family '" + std::string(family) + "'");
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedVariant& a, const RankedVariant& b) { return a.predicted_ns < b.predicted_ns; });
  return out;
}

std::vector<Prediction> predictions(const LatencyTable& table) {
  std::vector<Prediction> out;
  for (const auto& f : registry()) {
    if (covers(f, table)) out.push_back({f.family, f.variant, predict(f, table)});
  }
  return out;
}

DeviationReport deviation_report(const std::vector<Prediction>& predicted,
                                 const std::vector<bench::BenchRecord>& measured, double threshold) {
  DeviationReport report;
  std::set<std::string> missing;
  for (const auto& m : measured) {
    const auto it = std::find_if(predicted.begin(), predicted.end(), [&](const Prediction& p) {
      return p.family == m.workload && p.variant == m.variant;
    });
    if (it == predicted.end()) {
      if (missing.insert(measured_key(m)).second) report.unmatched.push_back(measured_key(m));
      continue;
    }
    DeviationRow row{m.workload, m.variant, m.procs, it->predicted_ns, m.mean_ns, 0.0, false};
    if (it->predicted_ns > 0.0) row.ratio = m.mean_ns / it->predicted_ns;
    else row.ratio = m.mean_ns == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    row.flagged = row.ratio > threshold;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string to_csv(const DeviationReport& report) {
  std::string out = "workload,variant,P,predicted_ns,measured_ns,ratio,flagged\n";
  for (const auto& r : report.rows) {
    out += r.workload + "," + r.variant + "," + std::to_string(r.procs) + "," + util::format_fixed(r.predicted_ns, 3) +
           "," + util::format_fixed(r.measured_ns, 3) + "," + util::format_fixed(r.ratio, 4) + "," +
           (r.flagged ? "1" : "0") + "\n";
  }
  return out;
}

std::string to_table(const DeviationReport& report) {
  std::vector<std::vector<std::string>> rows{{"workload", "variant", "P", "predicted_ns", "measured_ns", "ratio", "flag"}};
  for (const auto& r : report.rows) {
    rows.push_back({r.workload, r.variant, std::to_string(r.procs), util::format_fixed(r.predicted_ns, 1),
                    util::format_fixed(r.measured_ns, 1), util::format_fixed(r.ratio, 3), r.flagged ? "*" : ""});
  }
  std::string out = util::aligned_table(rows, 2);
  for (const auto& key : report.unmatched) out += "unmatched: " + key + "\n";
  return out;
}

}  // namespace pgaslab::costmodel
