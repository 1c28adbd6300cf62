#pragma once

// Command reports. Layout under --out DIR:
//   DIR/<command>.json            full report (json format)
//   DIR/<command>_<table>.csv     one file per table
//   DIR/<command>.csv             key,value summary (csv format only)

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "slq/error.hpp"

namespace slq::io {

using ordered_json = nlohmann::ordered_json;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ResultReport {
  std::string command;
  std::string config_hash;
  ordered_json body = ordered_json::object();
  std::vector<std::pair<std::string, Table>> tables;
  bool pass = true;

  Table& table(const std::string& name, std::vector<std::string> columns) {
    tables.emplace_back(name, Table{std::move(columns), {}});
    return tables.back().second;
  }

  /// Records one named check and folds it into the overall verdict.
  void check(const std::string& name, bool ok) {
    body["checks"][name] = ok;
    pass = pass && ok;
  }
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << "\n";
  }
}

namespace detail {

inline void flatten_scalars(const ordered_json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten_scalars(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (j.is_number_float()) {
    out.emplace_back(prefix, format_number(j.get<double>()));
  } else if (j.is_primitive() && !j.is_null()) {
    out.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
  }
}

}  // namespace detail

inline ordered_json to_json(const ResultReport& r) {
  ordered_json out = ordered_json::object();
  out["command"] = r.command;
  out["config_hash"] = r.config_hash;
  out["pass"] = r.pass;
  for (const auto& [key, value] : r.body.items()) out[key] = value;
  for (const auto& [name, t] : r.tables) {
    ordered_json tj = ordered_json::object();
    tj["columns"] = t.columns;
    tj["rows"] = t.rows;
    out["tables"][name] = std::move(tj);
  }
  return out;
}

/// key,value summary of every scalar in the report body.
inline void write_summary_csv(std::ostream& os, const ResultReport& r) {
  std::vector<std::pair<std::string, std::string>> items;
  detail::flatten_scalars(r.body, "", items);
  os << "key,value\n";
  for (const auto& [k, v] : items) os << k << "," << v << "\n";
}

/// Writes the report files and returns their paths.
inline std::vector<std::string> emit_report(const ResultReport& r, const std::string& format, const std::string& out_dir) {
  if (format != "json" && format != "csv") throw Error(ErrorCode::config, "format must be json or csv");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory " + out_dir + ": " + ec.message());
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::io, "cannot write " + path);
    written.push_back(path);
    return f;
  };
  if (format == "json") {
    auto f = open(r.command + ".json");
    f << to_json(r).dump(2) << "\n";
  } else {
    auto f = open(r.command + ".csv");
    write_summary_csv(f, r);
  }
  for (const auto& [name, t] : r.tables) {
    auto f = open(r.command + "_" + name + ".csv");
    write_csv(f, t);
  }
  return written;
}

}  // namespace slq::io
