#include "matchlab/mechanism.hpp"

#include <algorithm>
#include <ostream>
#include <set>

namespace matchlab {

std::string to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::DA: return "da";
    case MechanismKind::DoSV: return "dosv";
    case MechanismKind::Hybrid: return "hybrid";
  }
  return "?";
}

MechanismKind parse_mechanism(const std::string& s) {
  if (s == "da") return MechanismKind::DA;
  if (s == "dosv") return MechanismKind::DoSV;
  if (s == "hybrid") return MechanismKind::Hybrid;
  throw InputError("unknown mechanism '" + s + "'");
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::Offer: return "offer";
    case EventKind::Learn: return "learn";
    case EventKind::FinalizeRol: return "finalize_rol";
    case EventKind::Match: return "match";
  }
  return "?";
}

int OfferSchedule::effective_horizon(const MarketInstance& m) const {
  if (horizon > 0) return horizon;
  int J = static_cast<int>(m.programs.size());
  for (const auto& [k, r] : release) J = std::max(J, r);
  return std::max(J, 1);
}

namespace {

// program -> students receiving its early offer
std::map<int, std::vector<int>> early_offers(const OfferSchedule& schedule, const MarketInstance& m) {
  std::map<int, std::vector<int>> out;
  for (const auto& [k, r] : schedule.release) {
    const auto* p = m.find_program(k);
    if (!p) throw InputError("schedule names unknown program " + std::to_string(k));
    const auto& list = m.ranking(k);
    auto n = std::min<std::size_t>(static_cast<std::size_t>(p->capacity), list.size());
    out[k].assign(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

}  // namespace

std::map<int, OfferArrival> derive_offer_arrival(const OfferSchedule& schedule, const MarketInstance& m) {
  const int J = schedule.effective_horizon(m);
  for (const auto& [k, r] : schedule.release)
    if (r < 1 || r > J) throw InputError("release period outside 1..J for program " + std::to_string(k));
  std::map<int, std::vector<std::pair<int, int>>> received;  // student -> (period, program)
  for (const auto& [k, students] : early_offers(schedule, m))
    for (int i : students) received[i].push_back({schedule.release.at(k), k});

  std::map<int, OfferArrival> out;
  for (const auto& s : m.students) {
    auto& list = received[s.id];
    std::sort(list.begin(), list.end());
    std::map<int, int> when;
    int prev = 0, horizon = J;
    for (const auto& [r, k] : list) {
      int e = std::max(r, prev + 1);
      when[k] = e;
      prev = e;
      horizon = std::max(horizon, e);
    }
    OfferArrival O = OfferArrival::none(horizon, s.applications.size());
    for (std::size_t j = 0; j < s.applications.size(); ++j) {
      auto it = when.find(s.applications[j]);
      if (it != when.end()) O.entries[j] = it->second;
    }
    out[s.id] = O;
  }
  return out;
}

void write_events_csv(std::ostream& out, const EventLog& log) {
  out << "period,kind,student_id,program_id\n";
  for (const auto& e : log)
    out << e.period << ',' << to_string(e.kind) << ',' << e.student << ','
        << (e.program ? std::to_string(*e.program) : std::string()) << '\n';
}

MechanismRun run_mechanism(MechanismKind kind, const MarketInstance& m, const OfferSchedule& schedule,
                           const AgentBundle& agents, RngStream& stream) {
  auto violations = validate_market(m);
  if (!violations.empty()) throw InputError("invalid market: " + violations.front().rule);

  OfferSchedule sched = schedule;
  if (kind == MechanismKind::DA) sched.release.clear();
  if (kind == MechanismKind::Hybrid) {
    std::set<int> periods;
    for (const auto& [k, r] : sched.release) periods.insert(r);
    if (periods.size() > 1) throw InputError("hybrid schedule needs one common release period");
  }
  const int J = sched.effective_horizon(m);

  MechanismRun run;
  run.arrivals = derive_offer_arrival(sched, m);
  int T = J;
  for (const auto& [i, O] : run.arrivals) T = std::max(T, O.horizon);

  std::map<int, std::vector<double>> prior;
  std::map<int, RngStream> rng;
  for (const auto& s : m.students) {
    prior[s.id] = agents.prior(s.id);
    if (prior[s.id].size() != s.applications.size()) throw InputError("prior size differs from applications");
    rng.emplace(s.id, stream.fork(static_cast<std::uint64_t>(s.id)));
  }

  auto beliefs_at = [&](int i, int t) {
    return update_beliefs(BeliefVector{prior[i]}, run.arrivals.at(i), t).p;
  };
  auto learn = [&](const StudentProfile& s, int t, const std::vector<double>& p) {
    for (int k : agents.learn(s.id, t, p, rng.at(s.id))) run.events.push_back({t, EventKind::Learn, s.id, k});
  };
  auto offers_at = [&](int t) {
    for (const auto& s : m.students) {
      const auto& O = run.arrivals.at(s.id);
      for (std::size_t j = 0; j < s.applications.size(); ++j)
        if (O.entries[j] == t && t <= O.horizon) run.events.push_back({t, EventKind::Offer, s.id, s.applications[j]});
    }
  };

  int finalize_period = T;
  switch (kind) {
    case MechanismKind::DA:
      for (const auto& s : m.students) learn(s, 0, prior[s.id]);
      finalize_period = 0;
      break;
    case MechanismKind::DoSV:
      for (int t = 1; t <= T; ++t) {
        offers_at(t);
        for (const auto& s : m.students) {
          const auto& O = run.arrivals.at(s.id);
          if (t >= O.first_learning_period() && t <= O.horizon) learn(s, t, beliefs_at(s.id, t));
        }
      }
      break;
    case MechanismKind::Hybrid: {
      // everything lands on the common date, so no sub-period serialization
      int c = sched.release.empty() ? J : sched.release.begin()->second;
      for (const auto& s : m.students) {
        const auto& O = run.arrivals.at(s.id);
        for (std::size_t j = 0; j < s.applications.size(); ++j)
          if (O.entries[j] <= O.horizon) run.events.push_back({c, EventKind::Offer, s.id, s.applications[j]});
      }
      for (const auto& s : m.students) learn(s, c, beliefs_at(s.id, run.arrivals.at(s.id).horizon));
      break;
    }
  }

  for (const auto& s : m.students) {
    const auto& O = run.arrivals.at(s.id);
    auto p = kind == MechanismKind::DA ? prior[s.id] : beliefs_at(s.id, O.horizon);
    run.rols[s.id] = agents.rank(s.id, p);
    run.events.push_back({finalize_period, EventKind::FinalizeRol, s.id, std::nullopt});
  }

  // Phase 2: each student enters holding her best early offer under her final list.
  HeldOffers held;
  ExhaustedSets exhausted;
  for (const auto& [k, students] : early_offers(sched, m))
    for (int i : students) exhausted[k].insert(i);
  for (const auto& s : m.students) {
    const auto& O = run.arrivals.at(s.id);
    for (int k : run.rols[s.id]) {
      auto it = std::find(s.applications.begin(), s.applications.end(), k);
      if (it == s.applications.end())
        throw InputError("student " + std::to_string(s.id) + " ranks program " + std::to_string(k) +
                         " without applying");
      if (O.entries[static_cast<std::size_t>(it - s.applications.begin())] <= O.horizon) {
        held[s.id] = k;
        break;
      }
    }
  }
  run.matching = gs_with_held_offers(m, run.rols, held, exhausted);
  for (const auto& s : m.students)
    run.events.push_back({T + 1, EventKind::Match, s.id, run.matching.program_of(s.id)});
  return run;
}

AgentBundle make_dp_agents(const MarketInstance& m, std::map<int, StudentModel> models) {
  struct Shared {
    std::map<int, StudentModel> models;
    std::map<int, LearningState> state;
    std::map<int, std::vector<int>> apps;
  };
  auto sh = std::make_shared<Shared>();
  for (const auto& s : m.students) {
    auto it = models.find(s.id);
    if (it == models.end()) throw InputError("no learning model for student " + std::to_string(s.id));
    if (it->second.problem.size() != s.applications.size() ||
        it->second.realized_atom.size() != s.applications.size())
      throw InputError("learning model size differs from applications for student " + std::to_string(s.id));
    sh->state[s.id] = LearningState::initial(s.applications.size());
    sh->apps[s.id] = s.applications;
  }
  sh->models = std::move(models);

  AgentBundle b;
  b.prior = [sh](int i) { return sh->models.at(i).problem.beliefs.p; };
  b.learn = [sh](int i, int, const std::vector<double>& p, RngStream&) {
    const auto& model = sh->models.at(i);
    auto opt = optimal_strategy(model.problem.with_beliefs(BeliefVector{p}));
    auto& st = sh->state.at(i);
    std::vector<int> learned;
    for (int a = opt.strategy.action(st); a != kStop; a = opt.strategy.action(st)) {
      st.atom[a] = model.realized_atom[a];
      learned.push_back(sh->apps.at(i)[a]);
    }
    return learned;
  };
  b.rank = [sh](int i, const std::vector<double>& p) {
    const auto& model = sh->models.at(i);
    auto r = rol_value(sh->state.at(i), model.problem.with_beliefs(BeliefVector{p}));
    RankOrderList rol;
    for (int j : r.rol) rol.push_back(sh->apps.at(i)[j]);
    return rol;
  };
  return b;
}

}  // namespace matchlab
