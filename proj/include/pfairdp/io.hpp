#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfairdp/mobo.hpp"
#include "pfairdp/pipeline.hpp"

namespace pfairdp {

// Shortest round-trip representation; identical input bits give identical
// text, which is what makes rerun outputs byte-comparable.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kFrontHeader =
    "repair_level,noise_multiplier,clipping_norm,epochs,learning_rate,batch_size,seed,"
    "accuracy,spd,epsilon,t_utility,t_fairness,t_privacy,on_front";

struct FrontRow {
  double repair_level = 0, noise_multiplier = 0, clipping_norm = 0;
  std::size_t epochs = 0;
  double learning_rate = 0;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  double accuracy = 0, spd = 0, epsilon = 0;
  double t_utility = 0, t_fairness = 0, t_privacy = 0;
  bool on_front = false;
};

// Every evaluation, one row each, flagged with front membership.
inline void write_front_csv(std::ostream& out, const ParetoArchive& archive) {
  out << kFrontHeader << '\n';
  std::vector<bool> on_front(archive.size(), false);
  for (const auto idx : archive.front()) on_front[idx] = true;
  for (std::size_t i = 0; i < archive.size(); ++i) {
    const auto& e = archive.entries()[i];
    const auto& c = e.config;
    const auto& o = e.objectives;
    out << format_double(c.repair_level) << ',' << format_double(c.noise_multiplier) << ','
        << format_double(c.clipping_norm) << ',' << c.epochs << ','
        << format_double(c.learning_rate) << ',' << c.batch_size << ',' << c.seed << ','
        << format_double(o.accuracy) << ',' << format_double(o.spd) << ','
        << format_double(o.epsilon) << ',' << format_double(o.transformed[0]) << ','
        << format_double(o.transformed[1]) << ',' << format_double(o.transformed[2]) << ','
        << (on_front[i] ? 1 : 0) << '\n';
  }
}

inline void write_front_csv(const std::filesystem::path& path, const ParetoArchive& archive) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_front_csv: cannot open " + path.string());
  write_front_csv(out, archive);
}

inline std::vector<FrontRow> read_front_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_front_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("read_front_csv: empty file");
  if (line != kFrontHeader)
    throw std::runtime_error("read_front_csv: unexpected header in " + path.string());
  std::vector<FrontRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 14)
      throw std::runtime_error("read_front_csv: row " + std::to_string(lineno) +
                               " has wrong field count");
    try {
      FrontRow r;
      r.repair_level = std::stod(cells[0]);
      r.noise_multiplier = std::stod(cells[1]);
      r.clipping_norm = std::stod(cells[2]);
      r.epochs = std::stoul(cells[3]);
      r.learning_rate = std::stod(cells[4]);
      r.batch_size = std::stoul(cells[5]);
      r.seed = std::stoull(cells[6]);
      r.accuracy = std::stod(cells[7]);
      r.spd = std::stod(cells[8]);
      r.epsilon = std::stod(cells[9]);
      r.t_utility = std::stod(cells[10]);
      r.t_fairness = std::stod(cells[11]);
      r.t_privacy = std::stod(cells[12]);
      r.on_front = cells[13] == "1";
      rows.push_back(r);
    } catch (const std::exception&) {
      throw std::runtime_error("read_front_csv: row " + std::to_string(lineno) + " is malformed");
    }
  }
  return rows;
}

inline void write_hv_trace_csv(std::ostream& out, const ParetoArchive& archive,
                               const std::string& method, std::uint64_t seed) {
  out << "iteration,hypervolume,method,seed\n";
  for (std::size_t i = 0; i < archive.hv_trace().size(); ++i)
    out << (i + 1) << ',' << format_double(archive.hv_trace()[i]) << ',' << method << ',' << seed
        << '\n';
}

inline void write_hv_trace_csv(const std::filesystem::path& path, const ParetoArchive& archive,
                               const std::string& method, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_hv_trace_csv: cannot open " + path.string());
  write_hv_trace_csv(out, archive, method, seed);
}

// Pairwise projections of the front in raw metric space, for plotting the
// three trade-off cross-sections.
inline void write_xsect_csvs(const std::filesystem::path& dir, const ParetoArchive& archive) {
  const auto write_pair = [&](const std::string& file, const std::string& header, auto getter) {
    std::ofstream out(dir / file);
    if (!out) throw std::runtime_error("write_xsect_csvs: cannot open " + (dir / file).string());
    out << header << '\n';
    for (const auto idx : archive.front()) {
      const auto [a, b] = getter(archive.entries()[idx].objectives);
      out << format_double(a) << ',' << format_double(b) << '\n';
    }
  };
  write_pair("xsect_uv.csv", "accuracy,epsilon",
             [](const ObjectiveTriple& o) { return std::pair{o.accuracy, o.epsilon}; });
  write_pair("xsect_uf.csv", "accuracy,spd",
             [](const ObjectiveTriple& o) { return std::pair{o.accuracy, o.spd}; });
  write_pair("xsect_fp.csv", "spd,epsilon",
             [](const ObjectiveTriple& o) { return std::pair{o.spd, o.epsilon}; });
}

// One JSON object per evaluation, append-style.
inline void append_run_log(std::ostream& out, const EvalRecord& record) {
  nlohmann::json j;
  const auto& c = record.config;
  j["config"] = {
      {"repair_level", c.repair_level},
      {"noise_multiplier", c.noise_multiplier},
      {"clipping_norm", c.clipping_norm},
      {"epochs", c.epochs},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"use_preprocessing", c.use_preprocessing},
      {"use_dp", c.use_dp},
      {"use_postprocessing", c.use_postprocessing},
      {"optimizer", c.optimizer == OptimizerState::Kind::adam ? "adam" : "sgd"},
  };
  if (c.dp_target_epsilon) j["config"]["dp_target_epsilon"] = *c.dp_target_epsilon;
  j["raw_objectives"] = {{"accuracy", record.objectives.accuracy},
                         {"spd", record.objectives.spd},
                         {"epsilon", record.objectives.epsilon}};
  j["transformed_objectives"] = record.objectives.transformed;
  j["seed"] = c.seed;
  j["wall_time_s"] = record.wall_time_s;
  out << j.dump() << '\n';
}

inline void write_run_log(const std::filesystem::path& path,
                          const std::vector<EvalRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_run_log: cannot open " + path.string());
  for (const auto& r : records) append_run_log(out, r);
}

inline void write_summary(const std::filesystem::path& path, const ParetoArchive& archive,
                          const std::string& method, std::uint64_t seed,
                          const std::vector<std::string>& context_lines = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_summary: cannot open " + path.string());
  out << "method: " << method << '\n';
  out << "seed: " << seed << '\n';
  for (const auto& l : context_lines) out << l << '\n';
  out << "evaluations: " << archive.size() << '\n';
  out << "front size: " << archive.front().size() << '\n';
  out << "final hypervolume: " << format_double(archive.current_hypervolume()) << '\n';
  const auto ref = archive.reference();
  out << "reference (transformed): " << format_double(ref[0]) << ", " << format_double(ref[1])
      << ", " << format_double(ref[2]) << '\n';
  if (!archive.front().empty()) {
    const auto best = [&](auto metric, const char* label) {
      std::size_t best_idx = archive.front().front();
      for (const auto idx : archive.front())
        if (metric(archive.entries()[idx].objectives) > metric(archive.entries()[best_idx].objectives))
          best_idx = idx;
      const auto& o = archive.entries()[best_idx].objectives;
      out << label << ": accuracy=" << format_double(o.accuracy) << " |spd|=" << format_double(o.spd)
          << " epsilon=" << format_double(o.epsilon) << '\n';
    };
    best([](const ObjectiveTriple& o) { return o.accuracy; }, "best accuracy point");
    best([](const ObjectiveTriple& o) { return -o.spd; }, "best fairness point");
    best([](const ObjectiveTriple& o) { return -o.epsilon; }, "best privacy point");
  }
}

// Standard layout for one optimization run's artifacts.
inline void write_run_outputs(const std::filesystem::path& dir, const RunResult& result,
                              const std::string& method, std::uint64_t seed,
                              const std::vector<std::string>& context_lines = {}) {
  std::filesystem::create_directories(dir);
  write_run_log(dir / "log.jsonl", result.records);
  write_front_csv(dir / "front.csv", result.archive);
  write_hv_trace_csv(dir / "hv_trace.csv", result.archive, method, seed);
  write_xsect_csvs(dir, result.archive);
  write_summary(dir / "summary.txt", result.archive, method, seed, context_lines);
}

}  // namespace pfairdp
