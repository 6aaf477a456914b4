#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "matchlab/learning.hpp"
#include "matchlab/market.hpp"
#include "matchlab/matching.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

enum class MechanismKind { DA, DoSV, Hybrid };

std::string to_string(MechanismKind k);
MechanismKind parse_mechanism(const std::string& s);

struct OfferSchedule {
  std::map<int, int> release;  // program id -> release period; absent = no early offers
  int horizon = 0;             // J; 0 derives max(number of programs, latest release)

  int effective_horizon(const MarketInstance& m) const;
};

/// Per student, entries aligned with her application list. Offers released to
/// one student in the same period are pushed into consecutive sub-periods in
/// program id order.
std::map<int, OfferArrival> derive_offer_arrival(const OfferSchedule& schedule, const MarketInstance& m);

enum class EventKind { Offer, Learn, FinalizeRol, Match };
std::string to_string(EventKind k);

struct Event {
  int period = 0;
  EventKind kind = EventKind::Offer;
  int student = 0;
  std::optional<int> program;
  bool operator==(const Event&) const = default;
};

using EventLog = std::vector<Event>;
void write_events_csv(std::ostream& out, const EventLog& log);

/// Callbacks standing in for the students. Belief vectors are aligned with the
/// student's application list.
struct AgentBundle {
  std::function<std::vector<double>(int student)> prior;
  /// programs the student learns now, in learning order
  std::function<std::vector<int>(int student, int period, const std::vector<double>& beliefs, RngStream& rng)> learn;
  std::function<RankOrderList(int student, const std::vector<double>& beliefs)> rank;
};

struct MechanismRun {
  Matching matching;
  EventLog events;
  RolMap rols;
  std::map<int, OfferArrival> arrivals;
};

MechanismRun run_mechanism(MechanismKind kind, const MarketInstance& m, const OfferSchedule& schedule,
                           const AgentBundle& agents, RngStream& stream);

/// A student solving the discrete learning program with realized qualities.
struct StudentModel {
  LearningProblem problem;         // distributions aligned with applications, beliefs = p0
  std::vector<int> realized_atom;  // true quality atom per application
};

/// Agents re-solve the optimal strategy at every call and follow it from their
/// current learning state, so repeated calls model the myopic per-period policy.
AgentBundle make_dp_agents(const MarketInstance& m, std::map<int, StudentModel> models);

}  // namespace matchlab
