#pragma once

// Deterministic report emission. Metric JSON and CSV tables never contain
// timestamps or environment state, so reruns with the same config and seed
// are byte-identical; wall-clock provenance goes to the run manifest instead.

#include "vn/common.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace vn::io {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal form; "nan"/"inf" never appear in valid reports.
inline std::string format_double(double v) {
  return Json(v).dump();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), "report: cannot open ", path, " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(f.good(), "report: short write to ", path);
}

inline void write_json(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline Json read_json(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "report: cannot open ", path);
  return Json::parse(f);
}

// CSV cells hold either verbatim strings or shortest-round-trip numbers.
// Every table opens with a comment line pointing at the manifest that
// produced it.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells) {
    require(cells.size() == header.size(), "csv: row has ", cells.size(), " cells, header has ",
            header.size());
    rows.push_back(std::move(cells));
  }

  std::string render(const std::string& manifest_name = "manifest.json") const {
    std::string out = "# manifest: " + manifest_name + "\n";
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        require(cells[i].find(',') == std::string::npos &&
                    cells[i].find('\n') == std::string::npos,
                "csv: cell \"", cells[i], "\" needs quoting, which this writer does not do");
        out += cells[i];
        out += i + 1 < cells.size() ? "," : "\n";
      }
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

inline std::string csv_num(double v) { return format_double(v); }

inline void write_csv(const std::string& path, const CsvTable& table,
                      const std::string& manifest_name = "manifest.json") {
  write_text_file(path, table.render(manifest_name));
}

}  // namespace vn::io
