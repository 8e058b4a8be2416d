#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "geolearn/errors.hpp"
#include "geolearn/lasso.hpp"

namespace geolearn::harness {

using Json = nlohmann::json;

/// Round-trip formatting for doubles in CSV output.
inline std::string num(double v) { return fmt::format("{:.17g}", v); }

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fingerprint_of(const Json& spec) { return fmt::format("{:016x}", fnv1a(spec.dump())); }

/// CSV table with a versioned comment line ("# geolearn <kind> v1") and a header row.
class CsvWriter {
 public:
  CsvWriter(std::string kind, std::vector<std::string> columns)
      : kind_(std::move(kind)), columns_(std::move(columns)) {}

  CsvWriter& row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_.size())
      throw ArgumentError(fmt::format("CSV row has {} cells, expected {}", cells.size(), columns_.size()));
    rows_.push_back(cells);
    return *this;
  }

  std::string str() const {
    std::string out = fmt::format("# geolearn {} v1\n", kind_);
    out += join(columns_);
    for (const auto& r : rows_) out += join(r);
    return out;
  }

  std::size_t size() const { return rows_.size(); }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    s += '\n';
    return s;
  }

  std::string kind_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArgumentError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Parsed CSV: header columns plus string cells; comment lines are skipped
/// after checking the versioned header.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw ArgumentError(fmt::format("CSV has no column '{}'", name));
  }
};

inline CsvTable read_csv(const std::filesystem::path& path, std::string_view kind) {
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line) || line != fmt::format("# geolearn {} v1", kind))
    throw ArgumentError(fmt::format("{} is not a geolearn {} v1 file", path.string(), kind));
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  CsvTable t;
  if (!std::getline(is, line)) throw ArgumentError(path.string() + " has no header row");
  t.columns = split(line);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto cells = split(line);
    if (cells.size() != t.columns.size())
      throw ArgumentError(fmt::format("{}: row has {} cells, expected {}", path.string(), cells.size(),
                                      t.columns.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

inline Json model_to_json(const RegressionModel& m, const Json& feature_spec) {
  Json j;
  j["format"] = "geolearn-model";
  j["version"] = 1;
  j["mode"] = m.mode == RegressionMode::penalized ? "penalized" : "constrained";
  Json hp;
  if (m.mode == RegressionMode::penalized) {
    hp["alpha"] = m.alpha;
    hp["intercept"] = m.fit_intercept;
  } else {
    hp["B"] = m.radius;
  }
  hp["feature_map"] = feature_spec;
  j["hyperparameters"] = hp;
  j["feature_dim"] = m.feature_dim;
  j["intercept"] = m.intercept;
  Json w = Json::array();
  for (const auto& [k, v] : m.weights) w.push_back(Json::array({k, v}));
  j["weights"] = w;
  j["fingerprint"] = m.fingerprint;
  j["trace"] = {{"iterations", m.trace.iterations},
                {"objective", m.trace.objective},
                {"optimality", m.trace.optimality},
                {"converged", m.trace.converged}};
  j["warning"] = m.warning;
  return j;
}

inline RegressionModel model_from_json(const Json& j) {
  try {
    if (j.at("format") != "geolearn-model" || j.at("version") != 1)
      throw ArgumentError("not a geolearn-model v1 document");
    RegressionModel m;
    m.mode = j.at("mode") == "penalized" ? RegressionMode::penalized : RegressionMode::constrained;
    const Json& hp = j.at("hyperparameters");
    if (m.mode == RegressionMode::penalized) {
      m.alpha = hp.at("alpha").get<double>();
      m.fit_intercept = hp.at("intercept").get<bool>();
    } else {
      m.radius = hp.at("B").get<double>();
    }
    m.feature_dim = j.at("feature_dim").get<std::uint64_t>();
    m.intercept = j.at("intercept").get<double>();
    for (const auto& e : j.at("weights"))
      m.weights.emplace_back(e.at(0).get<std::uint64_t>(), e.at(1).get<double>());
    m.fingerprint = j.at("fingerprint").get<std::string>();
    const Json& t = j.at("trace");
    m.trace = {t.at("iterations").get<int>(), t.at("objective").get<double>(),
               t.at("optimality").get<double>(), t.at("converged").get<bool>()};
    m.warning = j.at("warning").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace geolearn::harness
