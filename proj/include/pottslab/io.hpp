#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "spinsys.hpp"

namespace pottslab {

// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }

struct Column {
  std::string name;
  std::string unit;  // nats, probability, count, activity, ...
};

// CSV with '#' metadata lines, a '# units:' line, then header and rows.
struct Table {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<Column> columns;
  std::vector<std::vector<std::string>> rows;

  void add_meta(std::string key, std::string value) { meta.emplace_back(std::move(key), std::move(value)); }
  void add_row(std::vector<std::string> r) {
    require(r.size() == columns.size(), "row width does not match header");
    rows.push_back(std::move(r));
  }
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(std::ostream& os, const Table& t) {
  for (const auto& [k, v] : t.meta) os << "# " << k << ": " << v << '\n';
  os << "# units:";
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    os << (i ? "," : " ") << t.columns[i].name << '=' << t.columns[i].unit;
  os << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_field(t.columns[i].name);
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_field(r[i]);
    os << '\n';
  }
}

// Write to a sibling temp file, then rename over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(f), "cannot open '" + tmp.string() + "' for writing");
    f << content;
    f.flush();
    require(static_cast<bool>(f), "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot move output into place at '" + path.string() + "': " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// {"q": int, "entries": [[...]]} or {"potts": {"q": int, "B": real}}
inline InteractionMatrix model_from_json(const nlohmann::json& j) {
  require(j.is_object(), "model must be a JSON object");
  if (j.contains("potts")) {
    const auto& p = j.at("potts");
    require(p.is_object() && p.contains("q") && p.contains("B"), "potts model needs q and B");
    require(p.at("q").is_number_integer() && p.at("B").is_number(), "potts q must be an integer and B a number");
    return build_potts_matrix(p.at("q").get<int>(), p.at("B").get<double>());
  }
  require(j.contains("q") && j.contains("entries"), "model needs either 'potts' or 'q' and 'entries'");
  require(j.at("q").is_number_integer(), "model q must be an integer");
  const int q = j.at("q").get<int>();
  require(q >= 2 && q <= kMaxColors, "model q out of range");
  const auto& e = j.at("entries");
  require(e.is_array() && static_cast<int>(e.size()) == q, "entries must have q rows");
  Matrix m(q, q);
  for (int i = 0; i < q; ++i) {
    require(e[i].is_array() && static_cast<int>(e[i].size()) == q, "entries row " + std::to_string(i) + " must have q values");
    for (int k = 0; k < q; ++k) {
      require(e[i][k].is_number(), "entries must be numbers");
      m(i, k) = e[i][k].get<double>();
    }
  }
  return InteractionMatrix::from_entries(m);
}

inline InteractionMatrix load_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("model file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

inline nlohmann::json model_to_json(const InteractionMatrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < M.q(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (int k = 0; k < M.q(); ++k) r.push_back(M(i, k));
    rows.push_back(r);
  }
  return {{"q", M.q()}, {"entries", rows}};
}

}  // namespace pottslab
