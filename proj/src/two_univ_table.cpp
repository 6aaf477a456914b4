#include <cmath>

#include "matchlab/two_univ.hpp"

namespace matchlab::two_univ {

namespace {

// Printed values at k = 3339/65536, rows DA, DoSV, Hybrid; columns O_none .. O_21.
constexpr double kPublished[3][5][5] = {
    {{100, 100, 100, 100, 100},
     {58.0, 58.0, 58.0, 58.0, 58.0},
     {49.7, 49.7, 49.7, 49.7, 49.7},
     {29.8, 29.8, 29.8, 29.8, 29.8},
     {56.2, 121.0, 93.3, 154.6, 154.6}},
    {{100, 100, 60.6, 100, 71.2},
     {58.0, 54.3, 100, 65.0, 100},
     {49.7, 51.2, 33.1, 47.2, 37.1},
     {29.8, 28.3, 46.4, 32.3, 42.4},
     {56.2, 121.1, 110.5, 155.5, 152.3}},
    {{100, 100, 60.6, 100, 100},
     {58.0, 54.3, 100, 65.0, 65.0},
     {49.7, 51.2, 33.3, 47.2, 47.2},
     {29.8, 28.3, 46.4, 32.3, 32.3},
     {56.2, 121.1, 110.5, 155.5, 155.5}},
};

constexpr Statistic kStats[5] = {Statistic::LearnX1, Statistic::LearnX2, Statistic::Top1, Statistic::Top2,
                                 Statistic::Welfare};

double value(MechanismKind m, ArrivalCase c, Statistic s, const TwoUnivParams& pr) {
  switch (s) {
    case Statistic::LearnX1: return learning_probabilities(m, c, pr).first;
    case Statistic::LearnX2: return learning_probabilities(m, c, pr).second;
    case Statistic::Top1: return top_rank_probabilities(m, c, pr).first;
    case Statistic::Top2: return top_rank_probabilities(m, c, pr).second;
    case Statistic::Welfare: return conditional_welfare(m, c, pr);
  }
  return 0.0;
}

}  // namespace

std::vector<TableCell> table1(const TwoUnivParams& params) {
  const TwoUnivParams ref = TwoUnivParams::baseline(kDefaultK.value());
  const bool at_reference = params.mu1 == ref.mu1 && params.mu2 == ref.mu2 && params.p1_0 == ref.p1_0 &&
                            params.p2_0 == ref.p2_0 && params.k == ref.k;
  std::vector<TableCell> out;
  for (std::size_t mi = 0; mi < kAllMechanisms.size(); ++mi)
    for (std::size_t si = 0; si < 5; ++si)
      for (std::size_t ci = 0; ci < kAllCases.size(); ++ci) {
        TableCell cell{kAllMechanisms[mi], kAllCases[ci], kStats[si]};
        cell.computed = display_scale(cell.statistic) * value(cell.mechanism, cell.arrival, cell.statistic, params);
        if (at_reference) {
          cell.published = kPublished[mi][si][ci];
          // Hybrid under O_2 equals DoSV by construction, yet the two printed cells differ.
          cell.flagged = std::abs(std::round(cell.computed * 10) / 10 - cell.published) > 0.051;
        } else {
          cell.published = std::nan("");
        }
        out.push_back(cell);
      }
  return out;
}

}  // namespace matchlab::two_univ
