#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "matchlab/learning.hpp"
#include "matchlab/two_univ.hpp"
#include "oracles.hpp"

using namespace matchlab;

namespace {

LearningProblem baseline_discrete(int atoms, double k) {
  LearningProblem p;
  p.distributions = {oracle::discretized_uniform(1.0 / 16, atoms), oracle::discretized_uniform(1.0 / 32, atoms)};
  p.beliefs.p = {9.0 / 16, 9.0 / 16};
  p.cost = k;
  return p;
}

double stop_payoff(const Strategy& s, std::size_t idx, const LearningProblem& prob) {
  return rol_value(s.state(idx), prob).value;
}

}  // namespace

TEST_SUITE("learning_engine") {
  TEST_CASE("belief updates") {
    BeliefVector p0{{9.0 / 16, 9.0 / 16}};
    CHECK(update_beliefs(p0, OfferArrival::none(2, 2), 1).p == p0.p);
    CHECK(update_beliefs(p0, {2, {1, 3}}, 1).p == std::vector<double>{1.0, 9.0 / 16});
    CHECK(update_beliefs(p0, {2, {2, 1}}, 2).p == std::vector<double>{1.0, 1.0});
  }

  TEST_CASE("rol value of learned and unlearned states") {
    LearningProblem p;
    p.distributions = {QualityDistribution::discrete({{0.3, 1.0}}), QualityDistribution::discrete({{0.5, 1.0}})};
    p.beliefs.p = {1, 1};
    auto r = rol_value({{0, 0}}, p);
    CHECK(r.value == 0.5);
    CHECK(r.rol == std::vector<int>{1, 0});

    LearningProblem u;
    u.distributions = {QualityDistribution::uniform(1.0 / 16, 0.5), QualityDistribution::uniform(1.0 / 32, 0.5)};
    u.beliefs.p = {9.0 / 16, 9.0 / 16};
    CHECK(rol_value(LearningState::initial(2), u).value == doctest::Approx(351.0 / 8192).epsilon(1e-15));

    p.distributions[0] = QualityDistribution::discrete({{-0.2, 1.0}});
    r = rol_value({{0, 0}}, p);
    CHECK(r.rol == std::vector<int>{1});
  }

  TEST_CASE("dp value matches exhaustive enumeration and dominates fixed orders") {
    RngStream root(31);
    for (int n = 0; n < 60; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto prob = oracle::random_discrete_problem(rng);
      auto opt = optimal_strategy(prob);
      CHECK(std::abs(opt.value - oracle::optimal_value_by_enumeration(prob)) <= 1e-12);
      CHECK(std::abs(evaluate_strategy(opt.strategy, prob).value - opt.value) <= 1e-12);
      std::vector<int> order(prob.size());
      std::iota(order.begin(), order.end(), 0);
      do {
        for (std::size_t m = 0; m <= order.size(); ++m)
          CHECK(opt.value >= oracle::fixed_order_value(prob, order, m) - 1e-12);
      } while (std::next_permutation(order.begin(), order.end()));
    }
  }

  TEST_CASE("bellman consistency at every state") {
    RngStream root(32);
    for (int n = 0; n < 20; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto prob = oracle::random_discrete_problem(rng);
      auto opt = optimal_strategy(prob);
      const auto& s = opt.strategy;
      for (std::size_t idx = 0; idx < s.num_states(); ++idx) {
        double best = stop_payoff(s, idx, prob);
        for (std::size_t j = 0; j < prob.size(); ++j) {
          if (s.digit(idx, j) >= 0) continue;
          double learn = -prob.cost;
          const auto& atoms = prob.distributions[j].atoms();
          for (std::size_t a = 0; a < atoms.size(); ++a)
            learn += atoms[a].second * s.value_at(s.child(idx, j, static_cast<int>(a)));
          best = std::max(best, learn);
        }
        CHECK(std::abs(s.value_at(idx) - best) <= 1e-12);
      }
    }
  }

  TEST_CASE("prohibitive cost stops everywhere") {
    RngStream rng(5);
    auto prob = oracle::random_discrete_problem(rng, 3);
    prob.cost = 10.0;
    auto opt = optimal_strategy(prob);
    for (std::size_t idx = 0; idx < opt.strategy.num_states(); ++idx) CHECK(opt.strategy.action_at(idx) == kStop);
    CHECK(opt.value == doctest::Approx(rol_value(LearningState::initial(prob.size()), prob).value));
  }

  TEST_CASE("ordinal information predicate") {
    LearningProblem p;
    p.beliefs.p = {0.5, 0.5};
    p.distributions = {QualityDistribution::point(0.2), QualityDistribution::point(0.7)};
    CHECK(is_ordinally_informed(p));
    p.distributions = {QualityDistribution::discrete({{0.1, 0.5}, {0.6, 0.5}}),
                       QualityDistribution::discrete({{0.3, 0.5}, {0.9, 0.5}})};
    CHECK_FALSE(is_ordinally_informed(p));
    p.distributions = {QualityDistribution::discrete({{-0.1, 0.5}, {0.2, 0.5}}), QualityDistribution::point(0.7)};
    CHECK_FALSE(is_ordinally_informed(p));
  }

  TEST_CASE("ordinally informed agents never learn and ignore offers") {
    RngStream root(77);
    for (int n = 0; n < 20; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto prob = oracle::random_ordinal_problem(rng);
      REQUIRE(is_ordinally_informed(prob));
      const int J = static_cast<int>(prob.size());
      std::vector<double> top;
      for (const auto& O : oracle::all_arrivals(J)) {
        auto pol = myopic_dosv_policy(prob, O);
        auto eval = prob.with_beliefs(update_beliefs(prob.beliefs, O, J));
        auto out = evaluate_myopic(pol, eval);
        for (double x : out.p_learn) CHECK(x == 0.0);
        if (top.empty()) top = out.p_top;
        CHECK(out.p_top == top);
      }
    }
  }

  TEST_CASE("no early offers reduces to the period-J optimum") {
    RngStream rng(8);
    auto prob = oracle::random_discrete_problem(rng, 3);
    auto O = OfferArrival::none(static_cast<int>(prob.size()), prob.size());
    auto pol = myopic_dosv_policy(prob, O);
    auto opt = optimal_strategy(prob);
    CHECK(pol.trace.size() == 1);
    auto a = evaluate_myopic(pol, prob), b = evaluate_strategy(opt.strategy, prob);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-14));
    CHECK(a.p_learn == b.p_learn);
  }

  TEST_CASE("a single period-one offer matches the optimum at updated beliefs") {
    RngStream root(9);
    for (int n = 0; n < 20; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto prob = oracle::random_discrete_problem(rng, 3);
      const int J = static_cast<int>(prob.size());
      OfferArrival O = OfferArrival::none(J, prob.size());
      O.entries[0] = 1;
      auto p1 = prob.with_beliefs(update_beliefs(prob.beliefs, O, 1));
      auto pol = myopic_dosv_policy(prob, O);
      auto a = evaluate_myopic(pol, p1), b = evaluate_strategy(optimal_strategy(p1).strategy, p1);
      CHECK(std::abs(a.value - b.value) <= 1e-12);
      CHECK(a.p_learn == b.p_learn);
    }
  }

  TEST_CASE("myopic traces never conflict and the one-shot optimum dominates") {
    RngStream root(10);
    for (int n = 0; n < 30; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto prob = oracle::random_discrete_problem(rng, 3);
      const int J = static_cast<int>(prob.size());
      auto da = optimal_strategy(prob);
      for (const auto& O : oracle::all_arrivals(J)) {
        auto pol = myopic_dosv_policy(prob, O);
        CHECK(pol.conflicts == 0);
        auto eval = prob.with_beliefs(update_beliefs(prob.beliefs, O, J));
        const double hybrid = optimal_strategy(eval).value;
        CHECK(hybrid >= evaluate_myopic(pol, eval).value - 1e-12);
        CHECK(hybrid >= evaluate_strategy(da.strategy, eval).value - 1e-12);
        CHECK(std::abs(evaluate_myopic(pol, eval).value - evaluate_strategy(pol.combined, eval).value) <= 1e-12);
      }
    }
  }

  TEST_CASE("discretized uniform instance approaches the analytic DoSV learning probabilities") {
    const auto pr = two_univ::TwoUnivParams::baseline();
    auto prob = baseline_discrete(401, pr.k);
    OfferArrival O{2, {2, 1}};
    auto pol = myopic_dosv_policy(prob, O);
    auto out = evaluate_myopic(pol, prob.with_beliefs(update_beliefs(prob.beliefs, O, 2)));
    auto exact = two_univ::learning_probabilities(MechanismKind::DoSV, two_univ::ArrivalCase::TwoOne, pr);
    CHECK(std::abs(out.p_learn[0] - exact.first) <= 0.01);
    CHECK(std::abs(out.p_learn[1] - exact.second) <= 0.01);
    CHECK(std::abs(out.p_learn[0] - 0.712) <= 0.01);
  }
}
