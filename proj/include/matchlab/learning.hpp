#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "matchlab/market.hpp"

namespace matchlab {

using UtilityFn = std::function<double(double)>;

struct LearningProblem {
  std::vector<QualityDistribution> distributions;  // F_j per program index j
  UtilityFn utility;                               // empty means identity
  double cost = 0.0;
  BeliefVector beliefs;

  std::size_t size() const { return distributions.size(); }
  double u(double x) const { return utility ? utility(x) : x; }
  /// E[u(X_j)]
  double expected_utility(std::size_t j) const;
  LearningProblem with_beliefs(BeliefVector p) const;
  void check() const;
};

/// atom[j] = -1 while program j is unlearned, otherwise the index of its
/// realized support point.
struct LearningState {
  std::vector<int> atom;

  static LearningState initial(std::size_t n) { return {std::vector<int>(n, -1)}; }
  bool learned(std::size_t j) const { return atom[j] >= 0; }
  std::vector<int> unlearned() const;
  bool operator==(const LearningState& o) const { return atom == o.atom; }
};

struct RolValue {
  double value = 0.0;
  std::vector<int> rol;  // program indices, best first, only strictly acceptable ones
};

/// v[j] is the (expected) utility of program j; p[j] its offer probability.
RolValue rol_value_from_utilities(const std::vector<double>& v, const std::vector<double>& p);
RolValue rol_value(const LearningState& state, const LearningProblem& prob);

BeliefVector update_beliefs(const BeliefVector& p0, const OfferArrival& O, int t);

inline constexpr int kStop = -1;

/// Pure learning policy over every state of a discrete problem.
class Strategy {
 public:
  Strategy() = default;
  explicit Strategy(const LearningProblem& prob);

  std::size_t num_states() const { return action_.size(); }
  std::size_t index(const LearningState& s) const;
  LearningState state(std::size_t index) const;
  std::size_t child(std::size_t index, std::size_t j, int atom) const { return index + (atom + 1) * stride_[j]; }
  int digit(std::size_t index, std::size_t j) const {
    return static_cast<int>((index / stride_[j]) % radix_[j]) - 1;
  }

  int action(const LearningState& s) const { return action_[index(s)]; }
  int action_at(std::size_t index) const { return action_[index]; }
  void set_action(std::size_t index, int a) { action_[index] = a; }
  /// Continuation value under the beliefs the strategy was solved for (NaN when not solved).
  double value_at(std::size_t index) const { return value_[index]; }
  void set_value(std::size_t index, double v) { value_[index] = v; }

  const BeliefVector& beliefs() const { return beliefs_; }
  void set_beliefs(BeliefVector p) { beliefs_ = std::move(p); }
  std::size_t programs() const { return radix_.size(); }

 private:
  std::vector<std::size_t> radix_, stride_;
  std::vector<int> action_;
  std::vector<double> value_;
  BeliefVector beliefs_;
};

struct OptimalStrategy {
  Strategy strategy;
  double value = 0.0;
};

/// Backward induction over all states. Ties prefer stop, then the lowest index.
OptimalStrategy optimal_strategy(const LearningProblem& prob);

struct MyopicPeriod {
  int period = 0;
  BeliefVector beliefs;
  Strategy strategy;                      // psi^t solved at p^t(O)
  std::vector<std::size_t> entry_states;  // states inherited from t-1
  std::vector<std::size_t> learn_states;  // reached states where psi^t learns
};

struct MyopicPolicy {
  Strategy combined;  // non-stop wherever some period learns; beliefs = p^J(O)
  std::vector<MyopicPeriod> trace;
  int conflicts = 0;  // reached states where two periods prescribe learning
};

MyopicPolicy myopic_dosv_policy(const LearningProblem& prob0, const OfferArrival& O);

bool is_ordinally_informed(const LearningProblem& prob);

struct PolicyOutcome {
  double value = 0.0;               // expected payoff net of learning costs
  std::vector<double> p_learn;      // per program
  std::vector<double> p_top;        // per program: probability it heads the list
  double p_empty = 0.0;
};

/// Follows the strategy's actions from (J, empty) and scores the final lists at
/// the beliefs of `eval`.
PolicyOutcome evaluate_strategy(const Strategy& s, const LearningProblem& eval);

/// Sequential period-by-period execution of a myopic policy; equal to
/// evaluating its combined strategy when no conflicts were recorded.
PolicyOutcome evaluate_myopic(const MyopicPolicy& policy, const LearningProblem& eval);

/// Audit dump: state_unlearned,state_learned_values,beliefs,action
void write_strategy_csv(std::ostream& out, const Strategy& s, const LearningProblem& prob);

}  // namespace matchlab
