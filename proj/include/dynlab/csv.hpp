#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dynlab/dynamics.hpp"
#include "dynlab/matrix.hpp"

namespace dynlab {

// 17 significant digits: doubles survive the round trip exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw std::invalid_argument("csv: no column named " + name);
  }
  std::vector<double> column_values(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
};

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (i) out += ',';
    out += t.header[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    if (first) {
      while (std::getline(ls, cell, ',')) t.header.push_back(cell);
      first = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    require(row.size() == t.header.size(), "csv: ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Write-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fixed column order: iteration, generator params, discriminator params,
// gradient norms, loss, then the game's named diagnostics.
inline CsvTable trajectory_table(const Trajectory& traj) {
  CsvTable t;
  if (traj.records.empty()) {
    t.header = {"iteration"};
    return t;
  }
  const auto& first = traj.records.front();
  t.header.push_back("iteration");
  for (std::size_t i = 0; i < first.gen_params.size(); ++i)
    t.header.push_back("g" + std::to_string(i));
  for (std::size_t i = 0; i < first.disc_params.size(); ++i)
    t.header.push_back("d" + std::to_string(i));
  t.header.push_back("grad_norm_gen");
  t.header.push_back("grad_norm_disc");
  t.header.push_back("loss");
  for (const auto& name : traj.diagnostic_names) t.header.push_back(name);
  for (const auto& rec : traj.records) {
    if (rec.substep != 0) continue;  // per-round rows only
    std::vector<double> row;
    row.push_back(static_cast<double>(rec.iteration));
    row.insert(row.end(), rec.gen_params.begin(), rec.gen_params.end());
    row.insert(row.end(), rec.disc_params.begin(), rec.disc_params.end());
    row.push_back(rec.grad_norm_gen);
    row.push_back(rec.grad_norm_disc);
    row.push_back(rec.loss);
    row.insert(row.end(), rec.diagnostics.begin(), rec.diagnostics.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace dynlab
