#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sb/error.hpp"

namespace sb::harness {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolkitVersion = "1.0.0";

// Finite numbers stay numbers; infinities become "inf"/"-inf", NaN null.
inline Json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

using Cell = std::variant<std::string, double, long long>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) fail(Errc::ShapeMismatch, "table row width differs from header");
    rows.push_back(std::move(row));
  }

  // Mean of a numeric column; any +inf entry makes the mean +inf.
  double column_mean(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) fail(Errc::InvalidConfig, "no such column: " + name);
    const auto col = static_cast<std::size_t>(it - columns.begin());
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (const auto* d = std::get_if<double>(&r[col])) {
        sum += *d;
        ++n;
      } else if (const auto* i = std::get_if<long long>(&r[col])) {
        sum += static_cast<double>(*i);
        ++n;
      }
    }
    return n == 0 ? std::nan("") : sum / static_cast<double>(n);
  }
};

struct Matrix {
  std::vector<std::string> row_labels;  // train condition
  std::vector<std::string> col_labels;  // test condition
  std::vector<std::vector<double>> values;
};

struct TimingRecord {
  std::string phase;
  std::size_t n = 0;
  double total_ms = 0.0;
  double median_ms = 0.0;
  double p90_ms = 0.0;
};

struct RunReport {
  std::string task;
  Json config = Json::object();
  std::vector<std::pair<std::string, Table>> tables;
  std::vector<std::pair<std::string, Matrix>> matrices;
  Json aggregates = Json::object();
  std::vector<TimingRecord> timings;
  Json environment = Json::object();
  std::string timestamp;

  Table& table(const std::string& name) {
    for (auto& [n, t] : tables)
      if (n == name) return t;
    fail(Errc::InvalidConfig, "no such table: " + name);
  }
  const Matrix& matrix(const std::string& name) const {
    for (const auto& [n, m] : matrices)
      if (n == name) return m;
    fail(Errc::InvalidConfig, "no such matrix: " + name);
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>)
          return number(v);
        else
          return v;
      },
      c);
}

inline Json to_json(const RunReport& r) {
  Json j;
  j["toolkit"] = "sb";
  j["version"] = kToolkitVersion;
  j["task"] = r.task;
  j["timestamp"] = r.timestamp;
  j["config"] = r.config;
  j["aggregates"] = r.aggregates;
  Json tables = Json::object();
  for (const auto& [name, t] : r.tables) {
    Json tj;
    tj["columns"] = t.columns;
    Json rows = Json::array();
    for (const auto& row : t.rows) {
      Json rj = Json::array();
      for (const auto& c : row) rj.push_back(cell_json(c));
      rows.push_back(std::move(rj));
    }
    tj["rows"] = std::move(rows);
    tables[name] = std::move(tj);
  }
  j["tables"] = std::move(tables);
  Json matrices = Json::object();
  for (const auto& [name, m] : r.matrices) {
    Json mj;
    mj["rows"] = m.row_labels;
    mj["cols"] = m.col_labels;
    Json vals = Json::array();
    for (const auto& row : m.values) {
      Json rj = Json::array();
      for (double v : row) rj.push_back(number(v));
      vals.push_back(std::move(rj));
    }
    mj["values"] = std::move(vals);
    matrices[name] = std::move(mj);
  }
  j["matrices"] = std::move(matrices);
  Json timings = Json::array();
  for (const auto& t : r.timings) {
    Json tj;
    tj["phase"] = t.phase;
    tj["n"] = t.n;
    tj["total_ms"] = t.total_ms;
    tj["median_ms"] = t.median_ms;
    tj["p90_ms"] = t.p90_ms;
    timings.push_back(std::move(tj));
  }
  j["timings"] = std::move(timings);
  j["environment"] = r.environment;
  return j;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return Json(v).dump();
}

inline std::string csv_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>)
          return csv_escape(v);
        else if constexpr (std::is_same_v<T, double>)
          return csv_number(v);
        else
          return std::to_string(v);
      },
      c);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) fail(Errc::IoFailure, "write failed: " + path.string());
}

}  // namespace detail

inline std::string table_csv(const Table& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << detail::csv_escape(t.columns[i]);
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << detail::csv_cell(row[i]);
    os << '\n';
  }
  return os.str();
}

// Header row holds test-condition labels; first column the train condition.
inline std::string matrix_csv(const Matrix& m) {
  std::ostringstream os;
  os << "train\\test";
  for (const auto& c : m.col_labels) os << ',' << detail::csv_escape(c);
  os << '\n';
  for (std::size_t r = 0; r < m.values.size(); ++r) {
    os << detail::csv_escape(m.row_labels[r]);
    for (double v : m.values[r]) os << ',' << detail::csv_number(v);
    os << '\n';
  }
  return os.str();
}

inline void emit_report(const RunReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  detail::write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  for (const auto& [name, t] : report.tables) detail::write_text(dir / (name + ".csv"), table_csv(t));
  for (const auto& [name, m] : report.matrices) detail::write_text(dir / (name + ".csv"), matrix_csv(m));
  if (!report.timings.empty()) {
    Table t{{"phase", "n", "total_ms", "median_ms", "p90_ms"}, {}};
    for (const auto& r : report.timings)
      t.add({r.phase, static_cast<long long>(r.n), r.total_ms, r.median_ms, r.p90_ms});
    detail::write_text(dir / "timings.csv", table_csv(t));
  }
}

// Drops the fields that legitimately differ between identical runs.
inline Json strip_volatile(Json j) {
  j.erase("timestamp");
  j.erase("timings");
  j.erase("environment");
  return j;
}

}  // namespace sb::harness
