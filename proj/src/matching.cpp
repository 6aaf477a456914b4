#include "matchlab/matching.hpp"

#include <algorithm>
#include <unordered_map>

namespace matchlab {

std::optional<int> Matching::program_of(int student) const {
  auto it = assignment.find(student);
  if (it == assignment.end()) return std::nullopt;
  return it->second;
}

void Matching::assign(int student, int program) {
  assignment[student] = program;
  admitted[program].push_back(student);
}

namespace {

// Dense index over a market plus submitted lists.
struct Indexed {
  std::vector<int> sid, pid;
  std::unordered_map<int, int> sidx, pidx;
  std::vector<int> cap;
  std::vector<std::vector<int>> ranking;  // program -> student indices, best first
  std::vector<std::vector<int>> rank_of;  // program -> student -> position or -1
  std::vector<std::vector<int>> pref;     // student -> program -> ROL position or -1

  Indexed(const MarketInstance& m, const RolMap* rols) {
    auto violations = validate_market(m);
    if (!violations.empty()) {
      const auto& v = violations.front();
      throw InputError("invalid market: " + v.entity + " " + std::to_string(v.id) + ": " + v.rule);
    }
    for (const auto& p : m.programs) {
      pidx[p.id] = static_cast<int>(pid.size());
      pid.push_back(p.id);
      cap.push_back(p.capacity);
    }
    for (const auto& s : m.students) {
      sidx[s.id] = static_cast<int>(sid.size());
      sid.push_back(s.id);
    }
    const std::size_t ns = sid.size(), np = pid.size();
    ranking.assign(np, {});
    rank_of.assign(np, std::vector<int>(ns, -1));
    for (const auto& [k, list] : m.rankings) {
      int kk = pidx.at(k);
      for (std::size_t r = 0; r < list.size(); ++r) {
        int s = sidx.at(list[r]);
        ranking[kk].push_back(s);
        rank_of[kk][s] = static_cast<int>(r);
      }
    }
    pref.assign(ns, std::vector<int>(np, -1));
    if (!rols) return;
    for (const auto& [i, rol] : *rols) {
      auto it = sidx.find(i);
      if (it == sidx.end()) throw InputError("rank-order list for unknown student " + std::to_string(i));
      const auto& apps = m.students[it->second].applications;
      for (std::size_t r = 0; r < rol.size(); ++r) {
        int k = rol[r];
        if (std::find(apps.begin(), apps.end(), k) == apps.end())
          throw InputError("student " + std::to_string(i) + " ranks program " + std::to_string(k) +
                           " without applying");
        int kk = pidx.at(k);
        if (pref[it->second][kk] >= 0)
          throw InputError("student " + std::to_string(i) + " ranks program " + std::to_string(k) + " twice");
        pref[it->second][kk] = static_cast<int>(r);
      }
    }
  }

  Matching to_matching(const std::vector<int>& held) const {
    Matching out;
    for (std::size_t s = 0; s < held.size(); ++s)
      if (held[s] >= 0) out.assignment[sid[s]] = pid[held[s]];
    for (std::size_t k = 0; k < pid.size(); ++k)
      for (int s : ranking[k])
        if (held[s] == static_cast<int>(k)) out.admitted[pid[k]].push_back(sid[s]);
    return out;
  }
};

Matching run_rounds(const Indexed& ix, std::vector<int> held, std::vector<std::vector<char>> offered,
                    GsStats* stats) {
  const std::size_t ns = ix.sid.size(), np = ix.pid.size();
  std::vector<int> count(np, 0);
  for (int k : held)
    if (k >= 0) ++count[k];
  std::vector<std::size_t> ptr(np, 0);
  std::vector<std::vector<int>> incoming(ns);
  if (stats) *stats = GsStats{};

  while (true) {
    int offers = 0;
    for (std::size_t k = 0; k < np; ++k) {
      int free = ix.cap[k] - count[k];
      const auto& list = ix.ranking[k];
      while (free > 0 && ptr[k] < list.size()) {
        int s = list[ptr[k]++];
        if (offered[k][s]) continue;
        offered[k][s] = 1;
        incoming[s].push_back(static_cast<int>(k));
        --free;
        ++offers;
      }
    }
    if (offers == 0) break;
    if (stats) {
      ++stats->rounds;
      stats->offers_per_round.push_back(offers);
    }
    for (std::size_t s = 0; s < ns; ++s) {
      if (incoming[s].empty()) continue;
      int best = held[s];
      for (int k : incoming[s]) {
        int pos = ix.pref[s][k];
        if (pos < 0) continue;
        if (best < 0 || pos < ix.pref[s][best]) best = k;
      }
      if (best != held[s]) {
        if (held[s] >= 0) --count[held[s]];
        ++count[best];
        held[s] = best;
      }
      incoming[s].clear();
    }
  }
  return ix.to_matching(held);
}

}  // namespace

Matching gs_program_proposing(const MarketInstance& m, const RolMap& rols, GsStats* stats) {
  Indexed ix(m, &rols);
  std::vector<std::vector<char>> offered(ix.pid.size(), std::vector<char>(ix.sid.size(), 0));
  return run_rounds(ix, std::vector<int>(ix.sid.size(), -1), std::move(offered), stats);
}

Matching gs_with_held_offers(const MarketInstance& m, const RolMap& rols, const HeldOffers& held,
                             const ExhaustedSets& exhausted, GsStats* stats) {
  Indexed ix(m, &rols);
  const std::size_t ns = ix.sid.size(), np = ix.pid.size();
  std::vector<std::vector<char>> offered(np, std::vector<char>(ns, 0));
  for (const auto& [k, students] : exhausted) {
    auto kt = ix.pidx.find(k);
    if (kt == ix.pidx.end()) throw InputError("exhausted set for unknown program " + std::to_string(k));
    for (int i : students) {
      auto st = ix.sidx.find(i);
      if (st == ix.sidx.end()) throw InputError("exhausted set names unknown student " + std::to_string(i));
      offered[kt->second][st->second] = 1;
    }
  }
  std::vector<int> hold(ns, -1);
  std::vector<int> count(np, 0);
  for (const auto& [i, k] : held) {
    auto st = ix.sidx.find(i);
    auto kt = ix.pidx.find(k);
    if (st == ix.sidx.end() || kt == ix.pidx.end()) throw InputError("held offer references unknown id");
    int s = st->second, kk = kt->second;
    if (!offered[kk][s])
      throw InputError("student " + std::to_string(i) + " holds an offer from " + std::to_string(k) +
                       " that was never extended");
    if (ix.rank_of[kk][s] < 0) throw InputError("held offer from a program that does not rank the student");
    if (ix.pref[s][kk] < 0) throw InputError("held offer from a program missing in the student's list");
    if (++count[kk] > ix.cap[kk]) throw InputError("held offers exceed capacity of " + std::to_string(k));
    hold[s] = kk;
  }
  return run_rounds(ix, std::move(hold), std::move(offered), stats);
}

StabilityReport is_stable(const MarketInstance& m, const RolMap& rols, const Matching& match) {
  Indexed ix(m, &rols);
  const std::size_t ns = ix.sid.size(), np = ix.pid.size();
  std::vector<int> held(ns, -1);
  std::vector<int> count(np, 0);
  std::vector<int> worst(np, -1);  // worst admitted rank position
  StabilityReport rep;
  for (const auto& [i, k] : match.assignment) {
    int s = ix.sidx.at(i), kk = ix.pidx.at(k);
    held[s] = kk;
    ++count[kk];
    int r = ix.rank_of[kk][s];
    if (r < 0 || ix.pref[s][kk] < 0) {
      rep.blocking.push_back({i, k, "unacceptable_assignment"});
      continue;
    }
    worst[kk] = std::max(worst[kk], r);
  }
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t k = 0; k < np; ++k) {
      int pos = ix.pref[s][k];
      if (pos < 0 || static_cast<int>(k) == held[s]) continue;
      if (held[s] >= 0 && ix.pref[s][held[s]] >= 0 && pos > ix.pref[s][held[s]]) continue;
      int r = ix.rank_of[k][s];
      if (r < 0) continue;
      if (count[k] < ix.cap[k])
        rep.blocking.push_back({ix.sid[s], ix.pid[k], "free_seat"});
      else if (worst[k] >= 0 && r < worst[k])
        rep.blocking.push_back({ix.sid[s], ix.pid[k], "preferred_over_admitted"});
    }
  }
  rep.stable = rep.blocking.empty();
  return rep;
}

std::map<int, std::set<int>> compute_expost_feasible(const MarketInstance& m, const Matching& match) {
  std::map<int, std::set<int>> out;
  std::map<int, std::unordered_map<int, int>> pos;
  for (const auto& [k, list] : m.rankings)
    for (std::size_t r = 0; r < list.size(); ++r) pos[k][list[r]] = static_cast<int>(r);
  std::map<int, int> last;  // program -> worst admitted position
  std::map<int, int> filled;
  for (const auto& [i, k] : match.assignment) {
    ++filled[k];
    auto it = pos[k].find(i);
    if (it != pos[k].end()) last[k] = std::max(last.count(k) ? last[k] : -1, it->second);
  }
  for (const auto& s : m.students) {
    auto& set = out[s.id];
    for (int k : s.applications) {
      const auto* p = m.find_program(k);
      auto it = pos[k].find(s.id);
      if (!p || it == pos[k].end()) continue;
      bool under = filled[k] < p->capacity;
      bool above = last.count(k) && it->second <= last[k];
      if (under || above) set.insert(k);
    }
  }
  return out;
}

Matching clearing_rsd(const MarketInstance& m, const std::vector<int>& remaining_students,
                      const std::map<int, int>& remaining_seats, RngStream& stream, const RolMap* rols) {
  std::vector<int> order = remaining_students;
  stream.shuffle(order);
  std::map<int, int> seats = remaining_seats;
  Matching out;
  for (int i : order) {
    const RankOrderList* prefs = nullptr;
    if (rols) {
      auto it = rols->find(i);
      if (it != rols->end()) prefs = &it->second;
    }
    if (!prefs) {
      const auto* s = m.find_student(i);
      if (!s) throw InputError("unknown student " + std::to_string(i));
      prefs = &s->applications;
    }
    for (int k : *prefs) {
      auto it = seats.find(k);
      if (it != seats.end() && it->second > 0) {
        --it->second;
        out.assign(i, k);
        break;
      }
    }
  }
  return out;
}

}  // namespace matchlab
