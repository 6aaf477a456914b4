#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matchlab {

/// Thrown when caller-supplied data breaks a documented precondition.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StudentProfile {
  int id = 0;
  double abitur = 0.0;             // percentile in [0,1]
  std::vector<int> applications;   // program ids, in application order
};

struct ProgramProfile {
  int id = 0;
  int capacity = 0;
};

struct MarketInstance {
  std::vector<StudentProfile> students;
  std::vector<ProgramProfile> programs;
  /// program id -> acceptable applicants, best first
  std::map<int, std::vector<int>> rankings;

  const StudentProfile* find_student(int id) const;
  const ProgramProfile* find_program(int id) const;
  const std::vector<int>& ranking(int program_id) const;
};

/// Strict preference order of a student over programs she applied to, best first.
using RankOrderList = std::vector<int>;
using RolMap = std::map<int, RankOrderList>;

struct Violation {
  std::string entity;  // "student", "program" or "ranking"
  int id = 0;
  std::string rule;
};

/// Checks every type invariant; never throws.
std::vector<Violation> validate_market(const MarketInstance& m);

/// Early-offer arrival for one student. entries[j] is the period in which the
/// offer of the j-th applied-to program arrives; horizon + 1 means never.
struct OfferArrival {
  int horizon = 0;
  std::vector<int> entries;

  static OfferArrival none(int horizon, std::size_t n);
  int never() const { return horizon + 1; }
  bool arrived(std::size_t j, int t) const { return entries[j] <= t; }
  /// min(first arrival, horizon)
  int first_learning_period() const;
  void check() const;
};

struct BeliefVector {
  std::vector<double> p;
  void check() const;
};

class QualityDistribution {
 public:
  enum class Kind { Uniform, Discrete };

  static QualityDistribution uniform(double center, double half_width);
  static QualityDistribution discrete(std::vector<std::pair<double, double>> atoms);
  static QualityDistribution point(double value);

  Kind kind() const { return kind_; }
  bool is_discrete() const { return kind_ == Kind::Discrete; }
  double center() const { return center_; }
  double half_width() const { return half_width_; }
  const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }
  double mean() const;

 private:
  Kind kind_ = Kind::Discrete;
  double center_ = 0.0;
  double half_width_ = 0.0;
  std::vector<std::pair<double, double>> atoms_;  // (value, probability)
};

/// Exact rational constant, converted to double only at use sites.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

}  // namespace matchlab
