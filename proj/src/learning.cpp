#include "matchlab/learning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "matchlab/csv.hpp"

namespace matchlab {

namespace {

// 5-point Gauss-Legendre nodes/weights on [-1,1].
constexpr std::array<double, 5> kGlNodes{-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                         0.9061798459386640};
constexpr std::array<double, 5> kGlWeights{0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                           0.4786286704993665, 0.2369268850561891};

constexpr std::size_t kMaxStates = 50'000'000;

std::vector<std::vector<double>> atom_utilities(const LearningProblem& prob) {
  std::vector<std::vector<double>> out(prob.size());
  for (std::size_t j = 0; j < prob.size(); ++j)
    for (const auto& [x, pr] : prob.distributions[j].atoms()) out[j].push_back(prob.u(x));
  return out;
}

std::vector<double> expected_utilities(const LearningProblem& prob) {
  std::vector<double> out(prob.size());
  for (std::size_t j = 0; j < prob.size(); ++j) out[j] = prob.expected_utility(j);
  return out;
}

// Utilities feeding rol_value at a given state index.
void state_utilities(const Strategy& s, std::size_t idx, const std::vector<std::vector<double>>& ua,
                     const std::vector<double>& eu, std::vector<double>& v) {
  for (std::size_t j = 0; j < v.size(); ++j) {
    int d = s.digit(idx, j);
    v[j] = d >= 0 ? ua[j][d] : eu[j];
  }
}

void require_discrete(const LearningProblem& prob) {
  for (const auto& d : prob.distributions)
    if (!d.is_discrete()) throw InputError("dynamic program needs finite discrete quality distributions");
}

}  // namespace

double LearningProblem::expected_utility(std::size_t j) const {
  const auto& d = distributions[j];
  if (d.is_discrete()) {
    double m = 0.0;
    for (const auto& [x, pr] : d.atoms()) m += pr * u(x);
    return m;
  }
  if (!utility) return d.center();
  // composite Gauss-Legendre over the uniform support
  const int panels = 64;
  const double a = d.center() - d.half_width();
  const double h = 2.0 * d.half_width() / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    double mid = a + (i + 0.5) * h;
    for (std::size_t q = 0; q < kGlNodes.size(); ++q) total += kGlWeights[q] * u(mid + 0.5 * h * kGlNodes[q]);
  }
  return total * 0.5 * h / (2.0 * d.half_width());
}

LearningProblem LearningProblem::with_beliefs(BeliefVector p) const {
  LearningProblem out = *this;
  out.beliefs = std::move(p);
  return out;
}

void LearningProblem::check() const {
  if (cost < 0.0) throw InputError("learning cost must be non-negative");
  if (beliefs.p.size() != distributions.size()) throw InputError("belief vector size mismatch");
  beliefs.check();
}

std::vector<int> LearningState::unlearned() const {
  std::vector<int> out;
  for (std::size_t j = 0; j < atom.size(); ++j)
    if (atom[j] < 0) out.push_back(static_cast<int>(j));
  return out;
}

RolValue rol_value_from_utilities(const std::vector<double>& v, const std::vector<double>& p) {
  RolValue out;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (v[j] > 0.0) out.rol.push_back(static_cast<int>(j));
  std::stable_sort(out.rol.begin(), out.rol.end(), [&](int a, int b) { return v[a] > v[b]; });
  double reach = 1.0;
  for (int j : out.rol) {
    out.value += reach * p[j] * v[j];
    reach *= 1.0 - p[j];
  }
  return out;
}

RolValue rol_value(const LearningState& state, const LearningProblem& prob) {
  std::vector<double> v(prob.size());
  for (std::size_t j = 0; j < prob.size(); ++j) {
    if (state.learned(j)) {
      const auto& d = prob.distributions[j];
      if (!d.is_discrete()) throw InputError("learned state needs a discrete distribution");
      v[j] = prob.u(d.atoms().at(state.atom[j]).first);
    } else {
      v[j] = prob.expected_utility(j);
    }
  }
  return rol_value_from_utilities(v, prob.beliefs.p);
}

BeliefVector update_beliefs(const BeliefVector& p0, const OfferArrival& O, int t) {
  if (p0.p.size() != O.entries.size()) throw InputError("belief and arrival sizes differ");
  if (t < 0 || t > O.horizon) throw InputError("period outside 0..J");
  BeliefVector out = p0;
  for (std::size_t j = 0; j < out.p.size(); ++j)
    if (O.arrived(j, t)) out.p[j] = 1.0;
  return out;
}

Strategy::Strategy(const LearningProblem& prob) : beliefs_(prob.beliefs) {
  require_discrete(prob);
  std::size_t n = 1;
  for (const auto& d : prob.distributions) {
    std::size_t r = d.atoms().size() + 1;
    radix_.push_back(r);
    stride_.push_back(n);
    if (n > kMaxStates / r) throw InputError("learning state space too large");
    n *= r;
  }
  action_.assign(n, kStop);
  value_.assign(n, std::numeric_limits<double>::quiet_NaN());
}

std::size_t Strategy::index(const LearningState& s) const {
  std::size_t idx = 0;
  for (std::size_t j = 0; j < radix_.size(); ++j) idx += static_cast<std::size_t>(s.atom[j] + 1) * stride_[j];
  return idx;
}

LearningState Strategy::state(std::size_t index) const {
  LearningState s = LearningState::initial(radix_.size());
  for (std::size_t j = 0; j < radix_.size(); ++j) s.atom[j] = digit(index, j);
  return s;
}

OptimalStrategy optimal_strategy(const LearningProblem& prob) {
  prob.check();
  Strategy s(prob);
  const auto ua = atom_utilities(prob);
  const auto eu = expected_utilities(prob);
  const std::size_t J = prob.size();
  std::vector<double> v(J);
  // children carry strictly larger indices, so a descending sweep is a valid
  // backward induction order
  for (std::size_t idx = s.num_states(); idx-- > 0;) {
    state_utilities(s, idx, ua, eu, v);
    double stop = rol_value_from_utilities(v, prob.beliefs.p).value;
    int best_j = kStop;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) {
      if (s.digit(idx, j) >= 0) continue;
      double cont = 0.0;
      const auto& atoms = prob.distributions[j].atoms();
      for (std::size_t d = 0; d < atoms.size(); ++d)
        cont += atoms[d].second * s.value_at(s.child(idx, j, static_cast<int>(d)));
      cont -= prob.cost;
      if (cont > best) {
        best = cont;
        best_j = static_cast<int>(j);
      }
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(stop));
    if (best_j != kStop && best > stop + tol) {
      s.set_action(idx, best_j);
      s.set_value(idx, best);
    } else {
      s.set_action(idx, kStop);
      s.set_value(idx, stop);
    }
  }
  double root = s.value_at(0);
  return {std::move(s), root};
}

MyopicPolicy myopic_dosv_policy(const LearningProblem& prob0, const OfferArrival& O) {
  prob0.check();
  require_discrete(prob0);
  if (O.entries.size() != prob0.size()) throw InputError("arrival vector size mismatch");
  O.check();
  MyopicPolicy out;
  out.combined = Strategy(prob0);
  out.combined.set_beliefs(update_beliefs(prob0.beliefs, O, O.horizon));

  std::vector<std::size_t> entry{0};
  const OptimalStrategy* prev = nullptr;
  OptimalStrategy current;
  for (int t = O.first_learning_period(); t <= O.horizon; ++t) {
    BeliefVector pt = update_beliefs(prob0.beliefs, O, t);
    if (!prev || prev->strategy.beliefs().p != pt.p) {
      current = optimal_strategy(prob0.with_beliefs(pt));
      prev = &current;
    }
    MyopicPeriod period{t, pt, current.strategy, entry, {}};
    const Strategy& psi = period.strategy;
    std::vector<char> seen(psi.num_states(), 0);
    std::vector<std::size_t> stack = entry, next;
    for (auto s : stack) seen[s] = 1;
    while (!stack.empty()) {
      std::size_t s = stack.back();
      stack.pop_back();
      int a = psi.action_at(s);
      if (a == kStop) {
        next.push_back(s);
        continue;
      }
      period.learn_states.push_back(s);
      if (out.combined.action_at(s) != kStop)
        ++out.conflicts;
      else
        out.combined.set_action(s, a);
      const auto n_atoms = prob0.distributions[a].atoms().size();
      for (std::size_t d = 0; d < n_atoms; ++d) {
        auto c = psi.child(s, a, static_cast<int>(d));
        if (!seen[c]) {
          seen[c] = 1;
          stack.push_back(c);
        }
      }
    }
    std::sort(next.begin(), next.end());
    std::sort(period.learn_states.begin(), period.learn_states.end());
    entry = next;
    out.trace.push_back(std::move(period));
  }
  return out;
}

bool is_ordinally_informed(const LearningProblem& prob) {
  require_discrete(prob);
  const auto ua = atom_utilities(prob);
  std::vector<double> lo(prob.size()), hi(prob.size());
  for (std::size_t j = 0; j < prob.size(); ++j) {
    lo[j] = *std::min_element(ua[j].begin(), ua[j].end());
    hi[j] = *std::max_element(ua[j].begin(), ua[j].end());
    if (!(lo[j] > 0.0 || hi[j] < 0.0)) return false;
  }
  for (std::size_t a = 0; a < prob.size(); ++a)
    for (std::size_t b = a + 1; b < prob.size(); ++b)
      if (!(hi[a] < lo[b] || hi[b] < lo[a])) return false;
  return true;
}

namespace {

void score_terminal(const Strategy& s, std::size_t idx, double mass, const LearningProblem& eval,
                    const std::vector<std::vector<double>>& ua, const std::vector<double>& eu,
                    std::vector<double>& v, PolicyOutcome& out) {
  state_utilities(s, idx, ua, eu, v);
  auto r = rol_value_from_utilities(v, eval.beliefs.p);
  int learned = 0;
  for (std::size_t j = 0; j < v.size(); ++j)
    if (s.digit(idx, j) >= 0) {
      ++learned;
      out.p_learn[j] += mass;
    }
  out.value += mass * (r.value - eval.cost * learned);
  if (r.rol.empty())
    out.p_empty += mass;
  else
    out.p_top[r.rol.front()] += mass;
}

PolicyOutcome blank_outcome(std::size_t J) {
  PolicyOutcome out;
  out.p_learn.assign(J, 0.0);
  out.p_top.assign(J, 0.0);
  return out;
}

// Pushes probability mass through one strategy; states where it stops collect
// in `stopped`.
void propagate(const Strategy& s, const LearningProblem& prob, std::vector<double>& mass,
               std::vector<double>& stopped) {
  for (std::size_t idx = 0; idx < mass.size(); ++idx) {
    double w = mass[idx];
    if (w == 0.0) continue;
    int a = s.action_at(idx);
    if (a == kStop) {
      stopped[idx] += w;
      continue;
    }
    const auto& atoms = prob.distributions[a].atoms();
    for (std::size_t d = 0; d < atoms.size(); ++d) mass[s.child(idx, a, static_cast<int>(d))] += w * atoms[d].second;
  }
}

}  // namespace

PolicyOutcome evaluate_strategy(const Strategy& s, const LearningProblem& eval) {
  eval.check();
  const auto ua = atom_utilities(eval);
  const auto eu = expected_utilities(eval);
  std::vector<double> mass(s.num_states(), 0.0), stopped(s.num_states(), 0.0);
  mass[0] = 1.0;
  propagate(s, eval, mass, stopped);
  PolicyOutcome out = blank_outcome(eval.size());
  std::vector<double> v(eval.size());
  for (std::size_t idx = 0; idx < stopped.size(); ++idx)
    if (stopped[idx] != 0.0) score_terminal(s, idx, stopped[idx], eval, ua, eu, v, out);
  return out;
}

PolicyOutcome evaluate_myopic(const MyopicPolicy& policy, const LearningProblem& eval) {
  eval.check();
  const auto ua = atom_utilities(eval);
  const auto eu = expected_utilities(eval);
  const std::size_t n = policy.combined.num_states();
  std::vector<double> mass(n, 0.0);
  mass[0] = 1.0;
  for (const auto& period : policy.trace) {
    std::vector<double> stopped(n, 0.0);
    propagate(period.strategy, eval, mass, stopped);
    mass.swap(stopped);
  }
  PolicyOutcome out = blank_outcome(eval.size());
  std::vector<double> v(eval.size());
  for (std::size_t idx = 0; idx < n; ++idx)
    if (mass[idx] != 0.0) score_terminal(policy.combined, idx, mass[idx], eval, ua, eu, v, out);
  return out;
}

void write_strategy_csv(std::ostream& out, const Strategy& s, const LearningProblem& prob) {
  out << "state_unlearned,state_learned_values,beliefs,action\n";
  std::string beliefs;
  for (std::size_t j = 0; j < s.beliefs().p.size(); ++j) {
    if (j) beliefs += ';';
    beliefs += format_double(s.beliefs().p[j]);
  }
  for (std::size_t idx = 0; idx < s.num_states(); ++idx) {
    std::string unlearned, learned;
    for (std::size_t j = 0; j < s.programs(); ++j) {
      int d = s.digit(idx, j);
      if (d < 0) {
        if (!unlearned.empty()) unlearned += ';';
        unlearned += std::to_string(j);
      } else {
        if (!learned.empty()) learned += ';';
        learned += std::to_string(j) + ':' + format_double(prob.distributions[j].atoms()[d].first);
      }
    }
    int a = s.action_at(idx);
    out << unlearned << ',' << learned << ',' << beliefs << ',' << (a == kStop ? std::string("stop") : std::to_string(a))
        << '\n';
  }
}

}  // namespace matchlab
