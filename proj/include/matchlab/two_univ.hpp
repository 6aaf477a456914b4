#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "matchlab/market.hpp"
#include "matchlab/mechanism.hpp"
#include "matchlab/rng.hpp"

namespace matchlab::two_univ {

// Qualities X_j ~ Uniform(mu_j - 1/2, mu_j + 1/2), u(x) = x, outside option 0.
struct TwoUnivParams {
  double mu1 = 1.0 / 16;
  double mu2 = 1.0 / 32;
  double p1_0 = 9.0 / 16;
  double p2_0 = 9.0 / 16;
  double k = 3339.0 / 65536;

  /// mu = (1/16, 1/32), p0 = (9/16, 9/16)
  static TwoUnivParams baseline(double k = 3339.0 / 65536);
  TwoUnivParams with_k(double k_new) const;
  /// Throws InputError unless 0 < mu2 < mu1 < 1/2 and k is strictly admissible.
  void check() const;
};

inline constexpr Rational kDefaultK{3339, 65536};
inline constexpr Rational kBaselineKLo{1575, 32768};
inline constexpr Rational kBaselineKHi{1764, 32768};

enum class ArrivalCase { None, One, Two, OneTwo, TwoOne };
inline constexpr std::array<ArrivalCase, 5> kAllCases{ArrivalCase::None, ArrivalCase::One, ArrivalCase::Two,
                                                     ArrivalCase::OneTwo, ArrivalCase::TwoOne};
inline constexpr std::array<MechanismKind, 3> kAllMechanisms{MechanismKind::DA, MechanismKind::DoSV,
                                                            MechanismKind::Hybrid};
std::string to_string(ArrivalCase c);

/// Open interval of learning costs under which both programs are worth
/// learning in some state and neither always.
std::pair<double, double> admissible_k_interval(const TwoUnivParams& params);

/// `k_count` equally spaced points strictly inside the admissible interval.
std::vector<double> k_grid(const TwoUnivParams& params, int k_count = 101);

/// Threshold below which the second program gets learned after learning
/// program `learn_first` (1 or 2).
double threshold_x_star(int learn_first, double p1, double p2, const TwoUnivParams& params);

/// Expected payoff after learning x of program `learn_first`, either also
/// learning the other program (cost of that second step included) or not.
double conditional_payoff(int learn_first, double x, bool learn_second, double p1, double p2,
                          const TwoUnivParams& params);
/// conditional_payoff(with) - conditional_payoff(without)
double payoff_difference(int learn_first, double x, double p1, double p2, const TwoUnivParams& params);

/// Threshold policy: learn `first` (0 = learn nothing); then learn the other
/// program iff x_first < threshold. Lists are scored at beliefs (p1, p2).
struct Plan {
  int first = 1;
  double threshold = 0.0;
  double p1 = 1.0, p2 = 1.0;
};

std::pair<double, double> arrival_beliefs(ArrivalCase c, const TwoUnivParams& params);
std::pair<double, double> first_offer_beliefs(ArrivalCase c, const TwoUnivParams& params);

/// Best of {learn nothing, 1 then 2, 2 then 1} at beliefs (p1, p2).
Plan optimal_plan(double p1, double p2, const TwoUnivParams& params);
Plan mechanism_plan(MechanismKind kind, ArrivalCase c, const TwoUnivParams& params);

double plan_welfare(const Plan& plan, const TwoUnivParams& params);
std::pair<double, double> plan_learning(const Plan& plan, const TwoUnivParams& params);
std::pair<double, double> plan_top_rank(const Plan& plan, const TwoUnivParams& params);

std::pair<double, double> learning_probabilities(MechanismKind kind, ArrivalCase c, const TwoUnivParams& params);
std::pair<double, double> top_rank_probabilities(MechanismKind kind, ArrivalCase c, const TwoUnivParams& params);
double conditional_welfare(MechanismKind kind, ArrivalCase c, const TwoUnivParams& params);

/// DoSV top-rank differences: univ 1 {O1-O0, O12-O2, O21-O2}, univ 2 {O2-O0, O12-O1, O21-O1}.
std::array<double, 6> early_offer_effects(const TwoUnivParams& params);
/// Same differences from their closed forms in k.
std::array<double, 6> early_offer_effects_closed_form(double k);
/// univ 1: O12 - O21; univ 2: O21 - O12 (DoSV top-rank probabilities).
std::array<double, 2> first_offer_effects(const TwoUnivParams& params);

struct WelfareComparison {
  ArrivalCase arrival = ArrivalCase::None;
  double hybrid_minus_da = 0.0;
  double hybrid_minus_dosv = 0.0;
  double dosv_minus_da = 0.0;
  bool signs_ok = false;
};
std::vector<WelfareComparison> welfare_comparisons(const TwoUnivParams& params);

/// Closed forms in k for the baseline means and priors.
double dosv_welfare_closed_form(ArrivalCase c, double k);
double da_welfare_closed_form(ArrivalCase c, double k);

struct CounterexampleEffects {
  std::array<double, 4> early{};  // top1: O1-O0, O21-O2; top2: O2-O0, O12-O1
  std::array<double, 2> first{};  // top1: O12-O21; top2: O21-O12
  bool k_in_window = false;       // p1(1-mu1)^2/2 < k < p2(1-mu1)^2/2
};
/// Throws InputError unless mu1 in (1/2,1), 0 < delta < k/2 and 0 < p1 < p2 < 1.
CounterexampleEffects counterexample_effects(double mu1, double delta, double p1_0, double p2_0, double k);

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

struct McResult {
  McEstimate learn1, learn2, top1, top2, welfare;
  std::uint64_t draws = 0;
};

McResult mc_oracle_plan(const Plan& plan, const TwoUnivParams& params, std::uint64_t n_draws,
                        const RngStream& stream, int threads = 1);
McResult mc_oracle(MechanismKind kind, ArrivalCase c, const TwoUnivParams& params, std::uint64_t n_draws,
                   const RngStream& stream, int threads = 1);

enum class Statistic { LearnX1, LearnX2, Top1, Top2, Welfare };
std::string to_string(Statistic s);

struct TableCell {
  MechanismKind mechanism;
  ArrivalCase arrival;
  Statistic statistic;
  double computed = 0.0;   // displayed units
  double published = 0.0;  // displayed units; NaN away from the reference parameters
  bool flagged = false;    // printed value disagrees with the derivation
};

/// All 75 cells at the given parameters, in displayed units (x100 or x1000).
std::vector<TableCell> table1(const TwoUnivParams& params);
double display_scale(Statistic s);

}  // namespace matchlab::two_univ
