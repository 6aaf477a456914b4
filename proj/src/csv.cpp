#include "matchlab/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace matchlab {

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
      continue;
    }
    if (cells.size() != t.header.size())
      throw InputError(path.filename().string() + ": row with " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (first) throw InputError(path.string() + " has no header");
  return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double x = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InputError("not a number: '" + s + "'");
  return x;
}

long long parse_int(const std::string& s) {
  long long x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InputError("not an integer: '" + s + "'");
  return x;
}

void write_market_csv(const std::filesystem::path& dir, const MarketInstance& m) {
  std::filesystem::create_directories(dir);
  CsvTable students{{"id", "abitur"}, {}};
  CsvTable apps{{"student_id", "program_id", "application_order"}, {}};
  for (const auto& s : m.students) {
    students.rows.push_back({std::to_string(s.id), format_double(s.abitur)});
    for (std::size_t a = 0; a < s.applications.size(); ++a)
      apps.rows.push_back({std::to_string(s.id), std::to_string(s.applications[a]), std::to_string(a + 1)});
  }
  CsvTable programs{{"id", "capacity"}, {}};
  for (const auto& p : m.programs) programs.rows.push_back({std::to_string(p.id), std::to_string(p.capacity)});
  CsvTable rankings{{"program_id", "rank", "student_id"}, {}};
  for (const auto& [k, list] : m.rankings)
    for (std::size_t r = 0; r < list.size(); ++r)
      rankings.rows.push_back({std::to_string(k), std::to_string(r + 1), std::to_string(list[r])});
  write_csv(dir / "students.csv", students);
  write_csv(dir / "programs.csv", programs);
  write_csv(dir / "applications.csv", apps);
  write_csv(dir / "rankings.csv", rankings);
}

MarketInstance read_market_csv(const std::filesystem::path& dir) {
  MarketInstance m;
  auto students = read_csv(dir / "students.csv");
  auto sid = students.column("id"), sab = students.column("abitur");
  std::map<int, std::size_t> index;
  for (const auto& r : students.rows) {
    StudentProfile s;
    s.id = static_cast<int>(parse_int(r[sid]));
    s.abitur = parse_double(r[sab]);
    index[s.id] = m.students.size();
    m.students.push_back(s);
  }

  auto programs = read_csv(dir / "programs.csv");
  auto pid = programs.column("id"), pcap = programs.column("capacity");
  for (const auto& r : programs.rows)
    m.programs.push_back({static_cast<int>(parse_int(r[pid])), static_cast<int>(parse_int(r[pcap]))});

  auto apps = read_csv(dir / "applications.csv");
  auto as = apps.column("student_id"), ap = apps.column("program_id"), ao = apps.column("application_order");
  std::map<int, std::vector<std::pair<long long, int>>> ordered;
  for (const auto& r : apps.rows) {
    int s = static_cast<int>(parse_int(r[as]));
    if (!index.count(s)) throw InputError("application by unknown student " + std::to_string(s));
    ordered[s].push_back({parse_int(r[ao]), static_cast<int>(parse_int(r[ap]))});
  }
  for (auto& [s, list] : ordered) {
    std::stable_sort(list.begin(), list.end());
    for (const auto& [o, k] : list) m.students[index[s]].applications.push_back(k);
  }

  if (std::filesystem::exists(dir / "rankings.csv")) {
    auto rk = read_csv(dir / "rankings.csv");
    auto rp = rk.column("program_id"), rr = rk.column("rank"), rs = rk.column("student_id");
    std::map<int, std::map<long long, int>> by_rank;
    for (const auto& r : rk.rows) {
      int k = static_cast<int>(parse_int(r[rp]));
      long long rank = parse_int(r[rr]);
      if (!by_rank[k].emplace(rank, static_cast<int>(parse_int(r[rs]))).second)
        throw InputError("ranking tie at program " + std::to_string(k) + " rank " + std::to_string(rank));
    }
    for (const auto& [k, list] : by_rank)
      for (const auto& [rank, s] : list) m.rankings[k].push_back(s);
  }
  return m;
}

}  // namespace matchlab
