#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "matchlab/market.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

struct Matching {
  std::map<int, int> assignment;               // student -> program; unassigned students absent
  std::map<int, std::vector<int>> admitted;    // program -> students, in the program's ranking order

  std::optional<int> program_of(int student) const;
  void assign(int student, int program);
  bool operator==(const Matching& o) const { return assignment == o.assignment; }
};

using HeldOffers = std::map<int, int>;                 // student -> program
using ExhaustedSets = std::map<int, std::set<int>>;    // program -> students already offered

struct GsStats {
  int rounds = 0;
  std::vector<int> offers_per_round;
};

Matching gs_program_proposing(const MarketInstance& m, const RolMap& rols, GsStats* stats = nullptr);

Matching gs_with_held_offers(const MarketInstance& m, const RolMap& rols, const HeldOffers& held,
                             const ExhaustedSets& exhausted, GsStats* stats = nullptr);

struct BlockingPair {
  int student = 0;
  int program = 0;
  std::string reason;  // free_seat, preferred_over_admitted, unacceptable_assignment
};

struct StabilityReport {
  bool stable = true;
  std::vector<BlockingPair> blocking;
};

StabilityReport is_stable(const MarketInstance& m, const RolMap& rols, const Matching& match);

/// Programs each student would have been admitted to given the realized matching.
std::map<int, std::set<int>> compute_expost_feasible(const MarketInstance& m, const Matching& match);

/// Random serial dictatorship over leftover seats. Preferences default to the
/// application order; pass rols to use submitted lists instead.
Matching clearing_rsd(const MarketInstance& m, const std::vector<int>& remaining_students,
                      const std::map<int, int>& remaining_seats, RngStream& stream,
                      const RolMap* rols = nullptr);

}  // namespace matchlab
