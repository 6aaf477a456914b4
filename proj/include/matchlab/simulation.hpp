#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "matchlab/market.hpp"
#include "matchlab/matching.hpp"
#include "matchlab/mechanism.hpp"
#include "matchlab/rng.hpp"

namespace matchlab::sim {

enum class CapacityRule { Share, Fixed };

struct SimConfig {
  int n_students = 500;
  int n_programs = 20;
  int n_samples = 100;
  std::uint64_t seed = 1;
  int min_applications = 2;  // real programs per student, outside option excluded
  int max_applications = 6;
  double v_program_sd = 1.0;
  double v_student_sd = 1.0;
  double v_outside_mean = -1.0;
  double se_scale = 0.5;  // se(V^FullInfo) ~ se_scale * Uniform(0.5, 1.5)
  CapacityRule capacity_rule = CapacityRule::Share;
  double capacity_share = 0.9;  // total seats / students, spread evenly
  int capacity_fixed = 10;
  double early_offer_share = 1.0;  // fraction of programs releasing early offers

  void check() const;
};

/// Id of the capacity-0 outside option placed in every application set.
inline constexpr int kOutsideOption = 0;

struct UtilityBase {
  double v_full = 0.0;
  double se_full = 1.0;
};

struct SimMarket {
  MarketInstance market;
  std::map<std::pair<int, int>, UtilityBase> base;  // (student, program)
  std::map<int, std::set<int>> extended_feasible;  // student -> F_i
  std::set<int> early_programs;                     // programs releasing early offers
  std::map<int, std::vector<int>> early_offers;     // student -> programs, ascending id

  const UtilityBase& utility(int student, int program) const;
};

double program_score(double abitur, double nu);

SimMarket generate_market(const SimConfig& cfg, RngStream stream);

/// Early offers: each early program's top `capacity` ranked applicants.
std::map<int, std::vector<int>> derive_early_offers(const MarketInstance& m, const std::set<int>& early_programs);

/// utility_base.csv: student_id,program_id,v_full,se_full,extended_feasible;
/// early_programs.csv: program_id.
void write_sim_market(const std::filesystem::path& dir, const SimMarket& sm);
SimMarket read_sim_market(const std::filesystem::path& dir);

/// Potential learning order over A_i. `arrivals` lists the early offers in
/// arrival order (only their set matters for Hybrid).
std::vector<int> learning_sequence(MechanismKind kind, const std::vector<int>& da_order,
                                   const std::vector<int>& arrivals);
/// program -> lambda; the first floor(A_i/2) entries of omega are learned.
std::map<int, int> learning_outcomes(const std::vector<int>& omega);

struct UtilityPair {
  double v_full = 0.0;
  double se_full = 1.0;
  double v_noinfo = 0.0;
  double eps_full = 0.0;
  double eps_noinfo = 0.0;

  double u_full() const { return v_full + eps_full; }
  double u_noinfo() const { return v_noinfo + eps_noinfo; }
};

double perceived_utility(const UtilityPair& pair, bool learned);

enum class Arm { FullInfo, DA, DoSV, Hybrid };
inline constexpr std::array<Arm, 4> kAllArms{Arm::FullInfo, Arm::DA, Arm::DoSV, Arm::Hybrid};
std::string to_string(Arm a);
Arm arm_of(MechanismKind k);

struct ArmOutcome {
  RolMap rols;
  Matching matching;
  std::map<int, std::map<int, int>> lambda;  // empty for FullInfo
};

/// Everything drawn and computed in one sample.
struct SampleDetail {
  std::map<std::pair<int, int>, UtilityPair> utilities;
  std::map<int, std::vector<int>> da_order;
  std::map<int, std::vector<int>> arrival_order;
  std::map<int, std::vector<int>> omega_dosv, omega_hybrid;
  std::map<Arm, ArmOutcome> arms;
};

/// Sample `s` draws from stream.fork(s) only, so samples can run in any order.
SampleDetail run_sample(const SimMarket& sm, const std::set<Arm>& arms, const RngStream& stream, int s);

/// Per (arm, sample), aligned with sm.market.students.
struct ArmSamples {
  std::vector<std::vector<int>> matched;     // program id or -1
  std::vector<std::vector<double>> utility;  // U at the match, unmatched rule applied
  std::vector<std::vector<char>> ordered;    // ex-post feasible programs ranked in true order
  std::vector<char> stable;                  // per sample, under the submitted lists
};

struct SimResults {
  std::set<Arm> arms;
  int samples = 0;
  std::vector<int> students;
  std::map<Arm, ArmSamples> data;
};

using SampleObserver = std::function<void(int sample, const SampleDetail& detail)>;

/// Full information always runs in addition to `kinds`. `observe` sees every
/// sample; it is called from the worker threads.
SimResults run_samples(const SimMarket& sm, const std::set<MechanismKind>& kinds, int n_samples,
                       const RngStream& stream, int threads = 1, const SampleObserver& observe = {});

/// Utility at a student's match in one sample.
double realized_utility(const SimMarket& sm, const SampleDetail& d, int student, std::optional<int> program);
/// Whether the ex-post feasible programs appear in `rol` in full-information order.
bool ranks_feasible_in_true_order(const SimMarket& sm, const SampleDetail& d, int student, const RankOrderList& rol,
                                  const std::set<int>& expost_feasible);

struct PiShares {
  double better = 0.0, worse = 0.0, equal = 0.0;
};

struct ComparisonStats {
  std::map<Arm, double> theta;
  std::map<Arm, std::vector<double>> eu;  // aligned with SimResults::students
  std::vector<std::pair<std::string, PiShares>> pi;
};

/// Pairs full_info_vs_da, dosv_vs_da, hybrid_vs_da, hybrid_vs_dosv, when both arms ran.
ComparisonStats compare(const SimResults& results);

void write_theta_csv(const std::filesystem::path& path, const ComparisonStats& stats);
void write_eu_csv(const std::filesystem::path& path, const ComparisonStats& stats, const std::vector<int>& students);
void write_pi_csv(const std::filesystem::path& path, const ComparisonStats& stats);

}  // namespace matchlab::sim
