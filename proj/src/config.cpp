#include "matchlab/config.hpp"

#include <fstream>
#include <sstream>

#include "matchlab/csv.hpp"

namespace matchlab {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(n) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw InputError("config line " + std::to_string(n) + ": empty key or value");
    if (!kv.emplace(key, value).second) throw InputError("config line " + std::to_string(n) + ": duplicate key " + key);
  }
  return kv;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sim::SimConfig sim_config_from(const KeyValues& kv) {
  sim::SimConfig c;
  for (const auto& [key, v] : kv) {
    auto as_int = [&] { return static_cast<int>(parse_int(v)); };
    if (key == "n_students") c.n_students = as_int();
    else if (key == "n_programs") c.n_programs = as_int();
    else if (key == "n_samples") c.n_samples = as_int();
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(v));
    else if (key == "min_applications") c.min_applications = as_int();
    else if (key == "max_applications") c.max_applications = as_int();
    else if (key == "v_program_sd") c.v_program_sd = parse_double(v);
    else if (key == "v_student_sd") c.v_student_sd = parse_double(v);
    else if (key == "v_outside_mean") c.v_outside_mean = parse_double(v);
    else if (key == "se_scale") c.se_scale = parse_double(v);
    else if (key == "capacity_rule") {
      if (v == "share") c.capacity_rule = sim::CapacityRule::Share;
      else if (v == "fixed") c.capacity_rule = sim::CapacityRule::Fixed;
      else throw InputError("capacity_rule must be share or fixed");
    }
    else if (key == "capacity_share") c.capacity_share = parse_double(v);
    else if (key == "capacity_fixed") c.capacity_fixed = as_int();
    else if (key == "early_offer_share") c.early_offer_share = parse_double(v);
    else throw InputError("unknown config key '" + key + "'");
  }
  c.check();
  return c;
}

}  // namespace matchlab
