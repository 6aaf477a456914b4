#include "matchlab/market.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace matchlab {

const StudentProfile* MarketInstance::find_student(int id) const {
  for (const auto& s : students)
    if (s.id == id) return &s;
  return nullptr;
}

const ProgramProfile* MarketInstance::find_program(int id) const {
  for (const auto& p : programs)
    if (p.id == id) return &p;
  return nullptr;
}

const std::vector<int>& MarketInstance::ranking(int program_id) const {
  static const std::vector<int> empty;
  auto it = rankings.find(program_id);
  return it == rankings.end() ? empty : it->second;
}

std::vector<Violation> validate_market(const MarketInstance& m) {
  std::vector<Violation> out;
  std::set<int> program_ids;
  for (const auto& p : m.programs) {
    if (!program_ids.insert(p.id).second) out.push_back({"program", p.id, "duplicate program id"});
    if (p.capacity < 0) out.push_back({"program", p.id, "negative capacity"});
  }

  std::set<int> student_ids;
  std::map<int, std::set<int>> applicants;  // program -> students who applied
  for (const auto& s : m.students) {
    if (!student_ids.insert(s.id).second) out.push_back({"student", s.id, "duplicate student id"});
    if (!(s.abitur >= 0.0 && s.abitur <= 1.0)) out.push_back({"student", s.id, "abitur outside [0,1]"});
    if (s.applications.empty()) out.push_back({"student", s.id, "empty application list"});
    std::set<int> seen;
    for (int k : s.applications) {
      if (!seen.insert(k).second) out.push_back({"student", s.id, "duplicate program " + std::to_string(k) + " in applications"});
      if (!program_ids.count(k)) out.push_back({"student", s.id, "application to unknown program " + std::to_string(k)});
      applicants[k].insert(s.id);
    }
  }

  for (const auto& [k, list] : m.rankings) {
    if (!program_ids.count(k)) out.push_back({"ranking", k, "ranking for unknown program"});
    std::set<int> seen;
    for (int i : list) {
      if (!seen.insert(i).second) out.push_back({"ranking", k, "student " + std::to_string(i) + " ranked twice"});
      if (!applicants[k].count(i)) out.push_back({"ranking", k, "ranked student " + std::to_string(i) + " did not apply"});
    }
  }
  return out;
}

OfferArrival OfferArrival::none(int horizon, std::size_t n) {
  return OfferArrival{horizon, std::vector<int>(n, horizon + 1)};
}

int OfferArrival::first_learning_period() const {
  int t = horizon;
  for (int e : entries) t = std::min(t, e);
  return t;
}

void OfferArrival::check() const {
  std::set<int> used;
  for (int e : entries) {
    if (e < 1 || e > horizon + 1) throw InputError("offer arrival entry out of range");
    if (e <= horizon && !used.insert(e).second) throw InputError("two early offers in one period");
  }
}

void BeliefVector::check() const {
  for (double x : p)
    if (!(x > 0.0 && x <= 1.0)) throw InputError("belief outside (0,1]");
}

QualityDistribution QualityDistribution::uniform(double center, double half_width) {
  if (!(half_width > 0.0)) throw InputError("uniform quality needs positive half-width");
  QualityDistribution d;
  d.kind_ = Kind::Uniform;
  d.center_ = center;
  d.half_width_ = half_width;
  return d;
}

QualityDistribution QualityDistribution::discrete(std::vector<std::pair<double, double>> atoms) {
  if (atoms.empty()) throw InputError("discrete quality needs at least one atom");
  double total = 0.0;
  for (const auto& [v, pr] : atoms) {
    if (!(pr > 0.0)) throw InputError("discrete quality probabilities must be positive");
    total += pr;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("discrete quality probabilities must sum to 1");
  QualityDistribution d;
  d.kind_ = Kind::Discrete;
  d.atoms_ = std::move(atoms);
  return d;
}

QualityDistribution QualityDistribution::point(double value) { return discrete({{value, 1.0}}); }

double QualityDistribution::mean() const {
  if (kind_ == Kind::Uniform) return center_;
  double m = 0.0;
  for (const auto& [v, pr] : atoms_) m += v * pr;
  return m;
}

}  // namespace matchlab
