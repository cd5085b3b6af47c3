// Command-line front end: dataset ingestion, replication presets, the three
// search methods, and small query helpers over produced artifacts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "pfairdp/dataset.hpp"
#include "pfairdp/fairness.hpp"
#include "pfairdp/io.hpp"
#include "pfairdp/mobo.hpp"
#include "pfairdp/pipeline.hpp"

// Keep httplib (and the system networking headers it drags in) after Eigen:
// glibc's <resolv.h> defines a `_res` macro that mangles Eigen internals.
#ifdef PFAIRDP_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct IngestOptions {
  std::string data_path = "data/adult";
  bool download = false;
  std::string out;
};

void download_adult(const fs::path& dir) {
#ifdef PFAIRDP_HAVE_OPENSSL
  fs::create_directories(dir);
  httplib::Client client("https://archive.ics.uci.edu");
  client.set_follow_location(true);
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  for (const std::string name : {"adult.data", "adult.test"}) {
    const std::string url = "/ml/machine-learning-databases/adult/" + name;
    std::cout << "fetching " << url << "...\n";
    auto res = client.Get(url);
    if (!res || res->status != 200)
      throw std::runtime_error("download failed for " + name +
                               (res ? " (HTTP " + std::to_string(res->status) + ")"
                                    : " (no response; is the network reachable?)"));
    std::ofstream out(dir / name, std::ios::binary);
    out << res->body;
    std::cout << "  wrote " << (dir / name).string() << " (" << res->body.size() << " bytes)\n";
  }
#else
  throw std::runtime_error(
      "this build has no TLS support; fetch adult.data and adult.test from the UCI "
      "repository manually into " +
      dir.string());
#endif
}

int cmd_ingest(const IngestOptions& opt) {
  if (opt.download) download_adult(opt.data_path);
  const pfairdp::RawTable table = pfairdp::load_adult(opt.data_path);
  std::cout << "loaded " << table.rows.size() << " rows (" << table.dropped_missing
            << " dropped for missing values)\n";

  const std::size_t sex = table.column_index("sex");
  const std::size_t income = table.column_index(table.label_column);
  std::vector<int> labels, groups;
  for (const auto& row : table.rows) {
    labels.push_back(row[income] == table.favorable_value ? 1 : 0);
    groups.push_back(row[sex] == "Male" ? 1 : 0);
  }
  const auto rep = pfairdp::fairness_report(labels, groups);
  std::cout << "label SPD (privileged=Male): " << pfairdp::format_double(rep.spd) << '\n';
  std::cout << "label DI: " << pfairdp::format_double(rep.di) << '\n';

  if (!opt.out.empty()) {
    pfairdp::write_raw_csv(table, opt.out);
    std::cout << "cached cleaned table to " << opt.out << '\n';
  }
  return 0;
}

struct ReplicateOptions {
  std::string study;
  std::string data_path = "data/adult";
  std::size_t runs = 10;
  std::uint64_t seed = 42;
  std::uint64_t split_seed = 7;
  std::vector<double> eps;
  std::string out = "runs";
};

std::string fmt3(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

int cmd_replicate(const ReplicateOptions& opt) {
  const pfairdp::RawTable raw = pfairdp::load_adult(opt.data_path);
  pfairdp::SplitSpec split{0.534, 0.133, 0.333, opt.split_seed};
  pfairdp::Splits splits = pfairdp::preprocess(raw, "sex", split);
  pfairdp::Evaluator evaluator(std::move(splits), {6, 6});

  std::vector<std::pair<std::string, std::optional<double>>> jobs;
  std::vector<double> eps = opt.eps;
  if (opt.study == "pannekoek") {
    if (eps.empty()) eps = {0.1};
    jobs = {{"S-NN", std::nullopt},
            {"DP-NN", eps.front()},
            {"F-NN", std::nullopt},
            {"DPF-NN", eps.front()}};
  } else if (opt.study == "xu") {
    if (eps.empty()) eps = {0.1, 1.0, 10.0};
    for (const std::string model : {"PrivLR", "PFLR", "PFLR*"})
      for (const double e : eps) jobs.emplace_back(model, e);
  } else {
    throw std::runtime_error("replicate: unknown study '" + opt.study +
                             "' (expected pannekoek or xu)");
  }

  std::vector<pfairdp::ReplicationRow> rows;
  std::printf("%-8s %-6s %-19s %-19s %s\n", "preset", "eps", "accuracy", "risk_diff", "eps_spent");
  std::uint64_t job_index = 0;
  for (const auto& [preset, target] : jobs) {
    const auto row = pfairdp::run_replication(
        evaluator, preset, target, opt.runs,
        pfairdp::Rng::splitmix64(opt.seed + 0x100000001ULL * ++job_index));
    rows.push_back(row);
    std::printf("%-8s %-6s %8s +- %-8s %8s +- %-8s %s\n", row.preset.c_str(),
                fmt3(row.target_epsilon).c_str(), fmt3(row.accuracy_mean).c_str(),
                fmt3(row.accuracy_std).c_str(), fmt3(row.risk_mean).c_str(),
                fmt3(row.risk_std).c_str(), fmt3(row.epsilon_mean).c_str());
    std::fflush(stdout);
  }

  fs::create_directories(opt.out);
  const fs::path csv = fs::path(opt.out) / ("replication_" + opt.study + ".csv");
  std::ofstream out(csv);
  if (!out) throw std::runtime_error("cannot open " + csv.string());
  out << "preset,target_epsilon,accuracy_mean,accuracy_std,risk_mean,risk_std,epsilon_mean,runs\n";
  for (const auto& r : rows)
    out << r.preset << ',' << pfairdp::format_double(r.target_epsilon) << ','
        << pfairdp::format_double(r.accuracy_mean) << ',' << pfairdp::format_double(r.accuracy_std)
        << ',' << pfairdp::format_double(r.risk_mean) << ',' << pfairdp::format_double(r.risk_std)
        << ',' << pfairdp::format_double(r.epsilon_mean) << ',' << r.runs << '\n';
  std::cout << "wrote " << csv.string() << '\n';
  return 0;
}

struct OptimizeOptions {
  std::string run_file;
  bool desk_scale = false;
  bool paper_scale = false;
  std::string out_dir_override;
};

pfairdp::Domains domains_from_json(const json& j) {
  pfairdp::Domains d;
  const auto range = [&](const char* key, pfairdp::Domains::Range& r) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != 2)
      throw std::runtime_error(std::string("domains.") + key + " must be [lo, hi]");
    r.lo = arr[0].get<double>();
    r.hi = arr[1].get<double>();
  };
  range("repair_level", d.repair_level);
  range("noise_multiplier", d.noise_multiplier);
  range("clipping_norm", d.clipping_norm);
  range("epochs", d.epochs);
  range("learning_rate", d.learning_rate);
  range("batch_size", d.batch_size);
  d.validate();
  return d;
}

int cmd_optimize(const OptimizeOptions& opt) {
  std::ifstream in(opt.run_file);
  if (!in) throw std::runtime_error("optimize: cannot open run file " + opt.run_file);
  json cfg = json::parse(in);

  const std::string name = cfg.at("name").get<std::string>();
  const std::string method = cfg.at("method").get<std::string>();
  if (method != "mobo" && method != "random" && method != "grid")
    throw std::runtime_error("optimize: method must be mobo, random, or grid");
  const std::uint64_t seed = cfg.value("seed", 0ULL);

  // Build the splits.
  const json& ds = cfg.at("dataset");
  const std::string ds_type = ds.at("type").get<std::string>();
  pfairdp::SplitSpec split{0.72, 0.08, 0.20, seed};
  if (cfg.contains("split")) {
    const json& s = cfg.at("split");
    split.train_fraction = s.value("train", split.train_fraction);
    split.dev_fraction = s.value("dev", split.dev_fraction);
    split.test_fraction = s.value("test", split.test_fraction);
    split.seed = s.value("seed", split.seed);
  }
  pfairdp::Splits splits;
  std::string dataset_desc;
  if (ds_type == "adult") {
    const auto raw = pfairdp::load_adult(ds.at("path").get<std::string>());
    splits = pfairdp::preprocess(raw, ds.value("protected", std::string("sex")), split);
    dataset_desc = "dataset: adult (" + std::to_string(raw.rows.size()) + " rows)";
  } else if (ds_type == "synthetic") {
    pfairdp::SyntheticSpec spec;
    spec.n_records = ds.value("n_records", 1000);
    spec.n_continuous = ds.value("n_continuous", 6);
    spec.group_fraction = ds.value("group_fraction", 0.5);
    spec.bias_strength = ds.value("bias_strength", 0.13);
    spec.seed = ds.value("seed", 0ULL);
    pfairdp::Dataset data = pfairdp::generate_synthetic(spec);
    splits = pfairdp::split_dataset(data, split);
    pfairdp::standardize_with_train_stats(splits);
    dataset_desc = "dataset: synthetic (" + std::to_string(spec.n_records) + " rows, bias " +
                   pfairdp::format_double(spec.bias_strength) + ")";
  } else {
    throw std::runtime_error("optimize: dataset.type must be adult or synthetic");
  }

  std::vector<std::size_t> hidden = {6, 6};
  if (cfg.contains("hidden")) hidden = cfg.at("hidden").get<std::vector<std::size_t>>();
  const double delta = cfg.value("delta", 1e-5);
  pfairdp::Evaluator evaluator(std::move(splits), hidden, delta);

  pfairdp::PipelineConfig base;
  base.use_preprocessing = true;
  base.use_dp = true;
  base.use_postprocessing = false;
  const std::string optimizer = cfg.value("optimizer", std::string("adam"));
  if (optimizer == "adam")
    base.optimizer = pfairdp::OptimizerState::Kind::adam;
  else if (optimizer == "sgd")
    base.optimizer = pfairdp::OptimizerState::Kind::sgd;
  else
    throw std::runtime_error("optimize: optimizer must be adam or sgd");

  const pfairdp::Domains domains =
      cfg.contains("domains") ? domains_from_json(cfg.at("domains")) : pfairdp::Domains{};

  // Budgets: paper-scale defaults, overridable by the run file, overridable in
  // turn by the explicit scale flags.
  std::size_t budget = method == "mobo" ? 250 : method == "random" ? 300 : 0;
  std::size_t n_init = 16;
  int grid_levels = 4;
  budget = cfg.value("budget", budget);
  n_init = cfg.value("n_init", n_init);
  grid_levels = cfg.value("grid_levels", grid_levels);
  if (opt.desk_scale) {
    budget = method == "mobo" ? 30 : method == "random" ? 40 : 0;
    grid_levels = 3;
    n_init = std::min<std::size_t>(n_init, 16);
  } else if (opt.paper_scale) {
    budget = method == "mobo" ? 250 : method == "random" ? 300 : 0;
    grid_levels = 4;
    n_init = 16;
  }

  std::size_t done = 0;
  const pfairdp::EvaluateFn evaluate = [&](const pfairdp::PipelineConfig& c) {
    const auto obj = evaluator.evaluate(c);
    ++done;
    std::printf("eval %3zu: acc=%.4f |spd|=%.4f eps=%s\n", done, obj.accuracy, obj.spd,
                pfairdp::format_double(obj.epsilon).c_str());
    std::fflush(stdout);
    return obj;
  };

  pfairdp::RunResult result;
  if (method == "mobo") {
    pfairdp::MoboOptions mo;
    mo.budget = budget;
    mo.n_init = n_init;
    mo.seed = seed;
    result = pfairdp::run_mobo(evaluate, domains, base, mo);
  } else if (method == "random") {
    result = pfairdp::run_random_search(evaluate, domains, base, budget, seed);
  } else {
    result = pfairdp::run_grid_search(evaluate, domains, base, grid_levels,
                                      cfg.value("fixed_batch", 32), cfg.value("fixed_lr", 1e-2),
                                      seed);
  }

  const fs::path out_root =
      opt.out_dir_override.empty() ? fs::path(cfg.value("out_dir", std::string("runs")))
                                   : fs::path(opt.out_dir_override);
  const fs::path dir = out_root / name;
  pfairdp::write_run_outputs(dir, result, method, seed, {dataset_desc});
  std::cout << "run '" << name << "': " << result.archive.size() << " evaluations, front "
            << result.archive.front().size() << ", hypervolume "
            << pfairdp::format_double(result.archive.current_hypervolume()) << '\n';
  std::cout << "artifacts in " << dir.string() << '\n';
  return 0;
}

struct FrontQueryOptions {
  std::string front_file;
  double accuracy_min = 0.0;
};

int cmd_front_query(const FrontQueryOptions& opt) {
  auto rows = pfairdp::read_front_csv(opt.front_file);
  std::erase_if(rows, [&](const pfairdp::FrontRow& r) {
    return !r.on_front || r.accuracy < opt.accuracy_min;
  });
  std::sort(rows.begin(), rows.end(), [](const pfairdp::FrontRow& a, const pfairdp::FrontRow& b) {
    if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
    return a.accuracy > b.accuracy;
  });
  std::cout << pfairdp::kFrontHeader << '\n';
  for (const auto& r : rows) {
    std::cout << pfairdp::format_double(r.repair_level) << ','
              << pfairdp::format_double(r.noise_multiplier) << ','
              << pfairdp::format_double(r.clipping_norm) << ',' << r.epochs << ','
              << pfairdp::format_double(r.learning_rate) << ',' << r.batch_size << ',' << r.seed
              << ',' << pfairdp::format_double(r.accuracy) << ',' << pfairdp::format_double(r.spd)
              << ',' << pfairdp::format_double(r.epsilon) << ','
              << pfairdp::format_double(r.t_utility) << ',' << pfairdp::format_double(r.t_fairness)
              << ',' << pfairdp::format_double(r.t_privacy) << ',' << (r.on_front ? 1 : 0) << '\n';
  }
  return 0;  // an empty result is a valid answer
}

struct HvTraceOptions {
  std::vector<std::string> runs;
};

int cmd_hv_trace(const HvTraceOptions& opt) {
  std::cout << "iteration,hypervolume,method,seed\n";
  for (const auto& run : opt.runs) {
    fs::path path = run;
    if (fs::is_directory(path)) path /= "hv_trace.csv";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("hv-trace: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "iteration,hypervolume,method,seed")
      throw std::runtime_error("hv-trace: unexpected header in " + path.string());
    while (std::getline(in, line))
      if (!line.empty()) std::cout << line << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PFairDP: fair and differentially private training with multi-objective search"};
  app.require_subcommand(1);

  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "fetch/inspect the Adult dataset");
  ingest_cmd->add_option("--data-path", ingest.data_path,
                         "directory with adult.data / adult.test (or a single file)");
  ingest_cmd->add_flag("--download", ingest.download, "download the two UCI files first");
  ingest_cmd->add_option("--out", ingest.out, "write the cleaned table to this CSV");

  ReplicateOptions repl;
  auto* repl_cmd = app.add_subcommand("replicate", "run the fixed replication presets");
  repl_cmd->add_option("--study", repl.study, "pannekoek or xu")->required();
  repl_cmd->add_option("--data-path", repl.data_path, "Adult data location");
  repl_cmd->add_option("--runs", repl.runs, "repetitions per preset (default 10)");
  repl_cmd->add_option("--seed", repl.seed, "base seed (default 42)");
  repl_cmd->add_option("--split-seed", repl.split_seed, "train/dev/test shuffle seed (default 7)");
  repl_cmd->add_option("--eps", repl.eps, "target epsilon list for DP presets");
  repl_cmd->add_option("--out", repl.out, "output directory (default runs)");

  OptimizeOptions optz;
  auto* opt_cmd = app.add_subcommand("optimize", "run a search described by a JSON run file");
  opt_cmd->add_option("--run", optz.run_file, "run configuration JSON")->required();
  auto* desk = opt_cmd->add_flag("--desk-scale", optz.desk_scale,
                                 "reduced budgets: mobo 30, random 40, grid 3^4");
  opt_cmd->add_flag("--paper-scale", optz.paper_scale,
                    "published budgets: mobo 250, random 300, grid 4^4")
      ->excludes(desk);
  opt_cmd->add_option("--out-dir", optz.out_dir_override, "override the run file's out_dir");

  FrontQueryOptions fq;
  auto* fq_cmd = app.add_subcommand("front-query", "filter a front CSV by minimum accuracy");
  fq_cmd->add_option("--front", fq.front_file, "front.csv produced by optimize")->required();
  fq_cmd->add_option("--accuracy-min", fq.accuracy_min, "keep front rows with accuracy >= this");

  HvTraceOptions hv;
  auto* hv_cmd = app.add_subcommand("hv-trace", "concatenate hypervolume traces from runs");
  hv_cmd->add_option("--run", hv.runs, "run directory or hv_trace.csv (repeatable)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(ingest);
    if (repl_cmd->parsed()) return cmd_replicate(repl);
    if (opt_cmd->parsed()) return cmd_optimize(optz);
    if (fq_cmd->parsed()) return cmd_front_query(fq);
    if (hv_cmd->parsed()) return cmd_hv_trace(hv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
