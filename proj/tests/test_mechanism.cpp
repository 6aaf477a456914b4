#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "matchlab/mechanism.hpp"
#include "oracles.hpp"

using namespace matchlab;

namespace {

std::map<int, StudentModel> random_models(const MarketInstance& m, RngStream& rng) {
  std::map<int, StudentModel> out;
  for (const auto& s : m.students) {
    StudentModel sm;
    for (std::size_t j = 0; j < s.applications.size(); ++j) {
      std::vector<std::pair<double, double>> atoms{{-0.3 + 1.2 * rng.uniform(), 0.5}, {-0.3 + 1.2 * rng.uniform(), 0.5}};
      sm.problem.distributions.push_back(QualityDistribution::discrete(atoms));
      sm.problem.beliefs.p.push_back(0.1 + 0.8 * rng.uniform());
      sm.realized_atom.push_back(static_cast<int>(rng.below(2)));
    }
    sm.problem.cost = 0.08 * rng.uniform();
    out[s.id] = sm;
  }
  return out;
}

std::string log_text(const EventLog& log) {
  std::ostringstream os;
  write_events_csv(os, log);
  return os.str();
}

/// Each student is the only early admit of exactly one program; all release in period 1.
MarketInstance one_offer_market(RngStream& rng) {
  MarketInstance m;
  const int K = 2 + static_cast<int>(rng.below(3));
  std::map<int, std::vector<int>> own, others;
  int id = 1;
  for (int k = 1; k <= K; ++k) {
    m.programs.push_back({k, 1});
    m.students.push_back({id, rng.uniform(), {k}});
    own[k] = {id++};
  }
  for (auto& s : m.students)
    for (int k = 1; k <= K; ++k)
      if (k != s.applications[0] && rng.uniform() < 0.6) {
        s.applications.push_back(k);
        others[k].push_back(s.id);
      }
  for (int k = 1; k <= K; ++k) {
    rng.shuffle(others[k]);
    auto list = own[k];
    list.insert(list.end(), others[k].begin(), others[k].end());
    m.rankings[k] = list;
  }
  return m;
}

}  // namespace

TEST_SUITE("mechanism_runtime") {
  TEST_CASE("offer arrival derivation") {
    MarketInstance m;
    m.students = {{1, 0.5, {1, 2, 3}}, {2, 0.5, {1, 2, 3}}};
    m.programs = {{1, 1}, {2, 1}, {3, 0}};
    m.rankings = {{1, {1, 2}}, {2, {1, 2}}, {3, {1, 2}}};
    OfferSchedule sched{{{1, 2}, {2, 5}, {3, 1}}, 6};
    auto arr = derive_offer_arrival(sched, m);
    CHECK(arr.at(1).entries == std::vector<int>{2, 5, 7});  // capacity 0 sends nothing
    CHECK(arr.at(2).entries == std::vector<int>{7, 7, 7});
  }

  TEST_CASE("simultaneous releases are serialized by program id") {
    MarketInstance m{{{1, 0.5, {2, 1}}}, {{1, 1}, {2, 1}}, {{1, {1}}, {2, {1}}}};
    auto arr = derive_offer_arrival({{{1, 1}, {2, 1}}, 3}, m);
    CHECK(arr.at(1).entries == std::vector<int>{2, 1});
  }

  TEST_CASE("scripted two-student trace") {
    MarketInstance m{{{1, 0.5, {1, 2}}, {2, 0.5, {1, 2}}}, {{1, 1}, {2, 1}}, {{1, {1, 2}}, {2, {2, 1}}}};
    std::map<int, int> calls;
    AgentBundle agents;
    agents.prior = [](int) { return std::vector<double>{0.5, 0.5}; };
    agents.learn = [&](int i, int, const std::vector<double>&, RngStream&) {
      return calls[i]++ == 0 ? std::vector<int>{1} : std::vector<int>{};
    };
    agents.rank = [](int, const std::vector<double>&) { return RankOrderList{1, 2}; };
    RngStream s(1);
    auto run = run_mechanism(MechanismKind::DoSV, m, {{{1, 1}}, 0}, agents, s);
    const EventLog expected{{1, EventKind::Offer, 1, 1},      {1, EventKind::Learn, 1, 1},
                            {2, EventKind::Learn, 2, 1},      {2, EventKind::FinalizeRol, 1, std::nullopt},
                            {2, EventKind::FinalizeRol, 2, std::nullopt}, {3, EventKind::Match, 1, 1},
                            {3, EventKind::Match, 2, 2}};
    CHECK(run.events == expected);
  }

  TEST_CASE("without early offers the three mechanisms coincide") {
    RngStream root(55);
    for (int n = 0; n < 100; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto sm = oracle::random_small_market(rng);
      auto models = random_models(sm.market, rng);
      std::vector<MechanismRun> runs;
      for (auto kind : {MechanismKind::DA, MechanismKind::DoSV, MechanismKind::Hybrid}) {
        RngStream s(3);
        runs.push_back(run_mechanism(kind, sm.market, {}, make_dp_agents(sm.market, models), s));
      }
      CHECK(runs[0].rols == runs[1].rols);
      CHECK(runs[0].rols == runs[2].rols);
      CHECK(runs[0].matching == runs[1].matching);
      CHECK(runs[0].matching == runs[2].matching);
    }
  }

  TEST_CASE("with one early offer each, DoSV and Hybrid coincide event for event") {
    RngStream root(56);
    for (int n = 0; n < 100; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto m = one_offer_market(rng);
      REQUIRE(validate_market(m).empty());
      auto models = random_models(m, rng);
      OfferSchedule sched;
      for (const auto& p : m.programs) sched.release[p.id] = 1;
      RngStream s1(4), s2(4);
      auto a = run_mechanism(MechanismKind::DoSV, m, sched, make_dp_agents(m, models), s1);
      auto b = run_mechanism(MechanismKind::Hybrid, m, sched, make_dp_agents(m, models), s2);
      CHECK(log_text(a.events) == log_text(b.events));
      CHECK(a.matching == b.matching);
    }
  }

  TEST_CASE("final matchings are stable, offers are never lost, runs replay") {
    RngStream root(57);
    for (int n = 0; n < 100; ++n) {
      RngStream rng = root.fork(static_cast<std::uint64_t>(n));
      auto sm = oracle::random_small_market(rng);
      auto models = random_models(sm.market, rng);
      OfferSchedule sched;
      for (const auto& p : sm.market.programs)
        if (rng.uniform() < 0.6) sched.release[p.id] = 1 + static_cast<int>(rng.below(3));
      for (auto kind : {MechanismKind::DA, MechanismKind::DoSV}) {
        RngStream s1(9), s2(9);
        auto run = run_mechanism(kind, sm.market, sched, make_dp_agents(sm.market, models), s1);
        auto again = run_mechanism(kind, sm.market, sched, make_dp_agents(sm.market, models), s2);
        CHECK(log_text(run.events) == log_text(again.events));
        CHECK(is_stable(sm.market, run.rols, run.matching).stable);
        CHECK(oracle::stable_by_definition(sm.market, run.rols, run.matching.assignment));
        for (const auto& e : run.events) {
          if (e.kind != EventKind::Offer) continue;
          const auto& rol = run.rols.at(e.student);
          auto k = std::find(rol.begin(), rol.end(), *e.program);
          if (k == rol.end()) continue;
          auto got = run.matching.program_of(e.student);
          REQUIRE(got.has_value());
          CHECK(std::find(rol.begin(), rol.end(), *got) <= k);
        }
      }
    }
  }

  TEST_CASE("a serialized horizon does not leak offers to other students") {
    // student 1 gets both offers in period 2, pushed to (2,3); student 2 gets none
    MarketInstance m{{{1, 0.5, {1, 2}}, {2, 0.5, {1, 2}}}, {{1, 1}, {2, 1}}, {{1, {1, 2}}, {2, {1, 2}}}};
    RngStream rng(2);
    auto models = random_models(m, rng);
    RngStream s(1);
    auto run = run_mechanism(MechanismKind::DoSV, m, {{{1, 2}, {2, 2}}, 0}, make_dp_agents(m, models), s);
    CHECK(run.arrivals.at(1).entries == std::vector<int>{2, 3});
    for (const auto& e : run.events) CHECK_FALSE((e.kind == EventKind::Offer && e.student == 2));
  }

  TEST_CASE("hybrid needs a common release date") {
    MarketInstance m{{{1, 0.5, {1, 2}}}, {{1, 1}, {2, 1}}, {{1, {1}}, {2, {1}}}};
    RngStream rng(1);
    auto agents = make_dp_agents(m, random_models(m, rng));
    RngStream s(1);
    CHECK_THROWS_AS(run_mechanism(MechanismKind::Hybrid, m, {{{1, 1}, {2, 2}}, 0}, agents, s), InputError);
  }
}
