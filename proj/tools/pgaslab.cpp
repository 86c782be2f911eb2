// SPDX-License-Identifier: Apache-2.0
// pgaslab: run component, data-structure and attentiveness benchmarks on the
// simulated fabric and compare them with the analytical cost model.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "pgaslab/bench/bench.hpp"
#include "pgaslab/costmodel/cost_model.hpp"
#include "pgaslab/error.hpp"
#include "pgaslab/util/format.hpp"

namespace {

using namespace pgaslab;

struct CommonOptions {
  std::uint64_t local_size = bench::default_local_size;
  std::optional<std::uint64_t> ops;
  int procs = 8;
  std::string config_path;
  std::uint64_t seed = 1;
  bool desk = false;
  std::string out_dir;
  std::string format = "csv";
};

void add_common(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("-s,--local-size", o.local_size, "Elements per rank (queue capacity for queue workloads)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("-n,--ops", o.ops, "Timed operations (attentiveness: samples per point)")->check(CLI::PositiveNumber);
  cmd.add_option("--procs", o.procs, "Ranks (P)")->check(CLI::PositiveNumber);
  cmd.add_option("--config", o.config_path, "Latency config file (key=value); falls back to $PGASLAB_CONFIG");
  cmd.add_option("--seed", o.seed, "Master seed");
  cmd.add_flag("--desk", o.desk, "Desk-scale run: default op count 10^4");
  cmd.add_option("--out", o.out_dir, "Write results into this directory instead of stdout");
  cmd.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "table"}));
}

sim::LatencyConfig load_config(const CommonOptions& o) {
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("PGASLAB_CONFIG"); env != nullptr) path = env;
  }
  if (path.empty()) return sim::LatencyConfig::defaults();
  return sim::load_latency_config(path);
}

std::uint64_t op_count(const CommonOptions& o) {
  if (o.ops) return *o.ops;
  return o.desk ? bench::desk_ops : bench::default_ops;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void emit(const CommonOptions& o, const std::string& stem, const std::string& text) {
  if (o.out_dir.empty()) {
    std::cout << text;
    return;
  }
  std::filesystem::create_directories(o.out_dir);
  const auto path = std::filesystem::path(o.out_dir) / (stem + (o.format == "csv" ? ".csv" : ".txt"));
  bench::write_text(path, text);
  std::cerr << "wrote " << path.string() << "\n";
}

void emit_records(const CommonOptions& o, const std::string& stem, const std::vector<bench::BenchRecord>& records) {
  emit(o, stem, o.format == "csv" ? bench::to_csv(records) : bench::to_table(records));
}

std::vector<bench::BenchRecord> run_list(const CommonOptions& o, const std::vector<std::string>& workloads) {
  bench::WorkloadSpec spec;
  spec.procs = o.procs;
  spec.local_size = o.local_size;
  spec.ops = op_count(o);
  spec.seed = o.seed;
  spec.config = load_config(o);
  std::vector<bench::BenchRecord> out;
  for (const auto& w : workloads) {
    spec.workload = w;
    out.push_back(bench::run_workload(spec));
  }
  return out;
}

std::vector<std::string> pick(const std::string& requested, const std::vector<std::string>& all, bool component) {
  if (requested.empty() || requested == "all") return all;
  auto list = split_list(requested);
  for (const auto& w : list) {
    if (bench::parse_workload(w).component != component) {
      throw UsageError("'" + w + "' is not a " + std::string(component ? "component" : "data-structure") +
                       " workload");
    }
  }
  return list;
}

// Formula table followed by the ranking of each family.
std::string predictions_text(const costmodel::LatencyTable& table) {
  std::vector<std::vector<std::string>> rows{{"family", "variant", "formula", "predicted_ns"}};
  for (const auto& f : costmodel::registry()) {
    if (!costmodel::covers(f, table)) continue;
    rows.push_back({f.family, f.variant, costmodel::to_string(f), util::format_fixed(costmodel::predict(f, table), 1)});
  }
  std::string out = util::aligned_table(rows, 3);
  for (const char* family : {"ht_insert", "ht_find", "q_push", "q_pop", "hash"}) {
    out += "\nrank " + std::string(family) + ":";
    for (const auto& v : costmodel::rank_variants(family, table)) out += " " + v.family + ":" + v.variant;
  }
  return out + "\n";
}

// Deviation of each record from its formula. With measured_attempts the
// persistent CAS term uses the record's own mean attempt count.
costmodel::DeviationReport compare(const std::vector<bench::BenchRecord>& records, const costmodel::LatencyTable& table,
                                   double threshold, bool measured_attempts) {
  costmodel::DeviationReport dev;
  for (const auto& r : records) {
    std::vector<costmodel::Prediction> pred;
    if (const auto* f = costmodel::find_formula(r.workload, r.variant); f != nullptr && costmodel::covers(*f, table)) {
      const auto used = measured_attempts ? costmodel::with_attempts(*f, std::max(1.0, r.attempts_mean)) : *f;
      pred.push_back({r.workload, r.variant, costmodel::predict(used, table)});
    }
    const auto one = costmodel::deviation_report(pred, {r}, threshold);
    dev.rows.insert(dev.rows.end(), one.rows.begin(), one.rows.end());
    for (const auto& key : one.unmatched) {
      if (std::find(dev.unmatched.begin(), dev.unmatched.end(), key) == dev.unmatched.end()) dev.unmatched.push_back(key);
    }
  }
  return dev;
}

int run(int argc, char** argv) {
  CLI::App app{"PGAS data-structure laboratory: simulated RDMA and active-message benchmarks"};
  app.require_subcommand(1);

  CommonOptions component_opts;
  std::string component_list;
  auto* component = app.add_subcommand("component", "Component microbenchmarks (put, get, CAS, FAD, AM round trip)");
  add_common(*component, component_opts);
  component->add_option("--workload", component_list, "Comma-separated ids or 'all'");

  CommonOptions ds_opts;
  std::string ds_list;
  auto* ds = app.add_subcommand("ds", "Hash table and queue benchmarks at each concurrency level");
  add_common(*ds, ds_opts);
  ds->add_option("--workload", ds_list, "Comma-separated ids (e.g. ht_insert_crw,am_q_push) or 'all'");

  CommonOptions att_opts;
  std::string compute_us = "1,2,4,8,16,32,64";
  std::string modes = "am_poll,am_pt,rdma_cw";
  auto* att = app.add_subcommand("attentiveness", "Push latency against target compute block length");
  add_common(*att, att_opts);
  att->add_option("--compute-us", compute_us, "Comma-separated compute block lengths in microseconds");
  att->add_option("--modes", modes, "Comma-separated modes: am_poll, am_pt, rdma_cw");

  CommonOptions report_opts;
  std::string measurements;
  double threshold = costmodel::default_flag_threshold;
  bool measured_attempts = false;
  auto* report = app.add_subcommand("report", "Cost-model predictions, rankings and deviation from measurements");
  add_common(*report, report_opts);
  report->add_option("--measurements", measurements, "CSV from a previous run (default: run every ds workload)");
  report->add_option("--threshold", threshold, "Flag ratios above this")->check(CLI::PositiveNumber);
  report->add_flag("--measured-attempts", measured_attempts,
                   "Predict persistent CAS with each record's measured attempt count");

  CLI11_PARSE(app, argc, argv);

  if (component->parsed()) {
    emit_records(component_opts, "component", run_list(component_opts, pick(component_list, bench::component_workloads(), true)));
  } else if (ds->parsed()) {
    emit_records(ds_opts, "ds", run_list(ds_opts, pick(ds_list, bench::ds_workloads(), false)));
  } else if (att->parsed()) {
    bench::AttentivenessSpec a;
    a.compute_us.clear();
    for (const auto& d : split_list(compute_us)) {
      try {
        a.compute_us.push_back(std::stoll(d));
      } catch (const std::exception&) {
        throw UsageError("bad --compute-us entry '" + d + "'");
      }
    }
    a.modes = split_list(modes);
    a.samples = op_count(att_opts);
    a.local_size = att_opts.local_size;
    a.seed = att_opts.seed;
    a.config = load_config(att_opts);
    emit_records(att_opts, "attentiveness", bench::run_attentiveness(a));
  } else if (report->parsed()) {
    const auto config = load_config(report_opts);
    const auto table = costmodel::latency_table(config);
    const auto records = measurements.empty() ? run_list(report_opts, bench::ds_workloads())
                                              : bench::parse_csv(bench::read_text(measurements));
    std::string text = report_opts.format == "csv" ? "" : predictions_text(table) + "\n";
    const auto dev = compare(records, table, threshold, measured_attempts);
    text += report_opts.format == "csv" ? costmodel::to_csv(dev) : costmodel::to_table(dev);
    emit(report_opts, "report", text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pgaslab::UsageError& e) {
    std::cerr << "pgaslab: " << e.what() << "\n";
    return 2;
  } catch (const pgaslab::Error& e) {
    std::cerr << "pgaslab: " << e.what() << "\n";
    return 1;
  }
}
