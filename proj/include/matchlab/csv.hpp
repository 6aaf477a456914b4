#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matchlab/market.hpp"

namespace matchlab {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws InputError if absent.
  std::size_t column(const std::string& name) const;
};

/// Plain comma-separated files with a header row; no quoting.
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Shortest representation that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& s);
long long parse_int(const std::string& s);

void write_market_csv(const std::filesystem::path& dir, const MarketInstance& m);
/// Reads students/programs/applications and, when present, rankings.csv.
MarketInstance read_market_csv(const std::filesystem::path& dir);

}  // namespace matchlab
