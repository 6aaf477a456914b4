#include "matchlab/two_univ.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace matchlab::two_univ {

TwoUnivParams TwoUnivParams::baseline(double k) {
  TwoUnivParams p;
  p.k = k;
  return p;
}

TwoUnivParams TwoUnivParams::with_k(double k_new) const {
  TwoUnivParams p = *this;
  p.k = k_new;
  return p;
}

void TwoUnivParams::check() const {
  if (!(0.0 < mu2 && mu2 < mu1 && mu1 < 0.5)) throw InputError("means must satisfy 0 < mu2 < mu1 < 1/2");
  if (!(p1_0 > 0.0 && p1_0 < 1.0 && p2_0 > 0.0 && p2_0 < 1.0)) throw InputError("priors must lie in (0,1)");
  auto [lo, hi] = admissible_k_interval(*this);
  if (!(k > lo && k < hi)) throw InputError("learning cost outside the admissible interval");
}

std::string to_string(ArrivalCase c) {
  switch (c) {
    case ArrivalCase::None: return "O_none";
    case ArrivalCase::One: return "O_1";
    case ArrivalCase::Two: return "O_2";
    case ArrivalCase::OneTwo: return "O_12";
    case ArrivalCase::TwoOne: return "O_21";
  }
  return "?";
}

std::string to_string(Statistic s) {
  switch (s) {
    case Statistic::LearnX1: return "p_learn_x1";
    case Statistic::LearnX2: return "p_learn_x2";
    case Statistic::Top1: return "p_top_rank_1";
    case Statistic::Top2: return "p_top_rank_2";
    case Statistic::Welfare: return "welfare";
  }
  return "?";
}

double display_scale(Statistic s) { return s == Statistic::Welfare ? 1000.0 : 100.0; }

std::pair<double, double> admissible_k_interval(const TwoUnivParams& pr) {
  const double a2 = (pr.mu2 - 0.5) * (pr.mu2 - 0.5);
  const double a1 = (pr.mu1 - 0.5) * (pr.mu1 - 0.5);
  const double d12 = (pr.mu2 - pr.mu1) * (pr.mu2 - pr.mu1);
  double lo = -1.0, hi = 1e300;
  for (double p1 : {pr.p1_0, 1.0})
    for (double p2 : {pr.p2_0, 1.0}) {
      lo = std::max(lo, 0.5 * (1 - p1) * p2 * a2);
      lo = std::max(lo, 0.5 * (1 - p2) * p1 * a1 + 0.5 * p1 * p2 * d12);
    }
  for (double p2 : {pr.p2_0, 1.0}) hi = std::min(hi, 0.5 * p2 * a2);
  for (double p1 : {pr.p1_0, 1.0}) hi = std::min(hi, 0.5 * p1 * a1);
  return {lo, hi};
}

std::vector<double> k_grid(const TwoUnivParams& params, int k_count) {
  auto [lo, hi] = admissible_k_interval(params);
  std::vector<double> out;
  for (int i = 1; i <= k_count; ++i) out.push_back(lo + (hi - lo) * i / (k_count + 1));
  return out;
}

namespace {

struct Side {
  double mu_a, mu_b, pa, pb;
};

Side side(int first, double p1, double p2, const TwoUnivParams& pr) {
  if (first == 1) return {pr.mu1, pr.mu2, p1, p2};
  if (first == 2) return {pr.mu2, pr.mu1, p2, p1};
  throw InputError("program index must be 1 or 2");
}

struct Quad {
  double c0 = 0, c1 = 0, c2 = 0;
  double operator()(double x) const { return c0 + x * (c1 + x * c2); }
  double integral(double a, double b) const {
    auto F = [&](double x) { return x * (c0 + x * (c1 / 2 + x * c2 / 3)); };
    return F(b) - F(a);
  }
  Quad operator+(const Quad& o) const { return {c0 + o.c0, c1 + o.c1, c2 + o.c2}; }
};

// c * (x - s)^2
Quad square(double c, double s) { return {c * s * s, -2 * c * s, c}; }

// Tables of conditional payoffs; case by position of x relative to 0, mu_b, mu_b + 1/2.
int payoff_case(double x, const Side& s) {
  if (x <= 0) return 1;
  if (x <= s.mu_b) return 2;
  if (x <= s.mu_b + 0.5) return 3;
  return 4;
}

Quad without_poly(int c, const Side& s) {
  if (c == 1) return {s.pb * s.mu_b, 0, 0};
  if (c == 2) return {s.pb * s.mu_b, (1 - s.pb) * s.pa, 0};
  return {(1 - s.pa) * s.pb * s.mu_b, s.pa, 0};
}

Quad difference_poly(int c, const Side& s, double k) {
  const double base = 0.5 * (1 - s.pa) * s.pb * (s.mu_b - 0.5) * (s.mu_b - 0.5) - k;
  if (c == 1) return {0.5 * s.pb * (s.mu_b - 0.5) * (s.mu_b - 0.5) - k, 0, 0};
  if (c == 2) return Quad{base, 0, 0} + square(0.5 * s.pa * s.pb, s.mu_b - 0.5);
  if (c == 3) return Quad{base, 0, 0} + square(0.5 * s.pa * s.pb, s.mu_b + 0.5);
  return {base, 0, 0};
}

Quad payoff_poly(int c, bool learn_second, const Side& s, double k) {
  Quad q = without_poly(c, s);
  return learn_second ? q + difference_poly(c, s, k) : q;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Integrates f over [lo, hi] piecewise between the given cut points.
template <class F>
double piecewise(double lo, double hi, std::vector<double> cuts, F&& f) {
  cuts.push_back(lo);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = std::max(lo, cuts[i]), b = std::min(hi, cuts[i + 1]);
    if (b > a) total += f(a, b);
  }
  return total;
}

double no_learning_value(double p1, double p2, const TwoUnivParams& pr) {
  // both means positive, mu1 > mu2: list 1-2
  return p1 * pr.mu1 + (1 - p1) * p2 * pr.mu2;
}

}  // namespace

double threshold_x_star(int learn_first, double p1, double p2, const TwoUnivParams& pr) {
  Side s = side(learn_first, p1, p2, pr);
  double rad = (2 * pr.k - (1 - s.pa) * s.pb * (s.mu_b - 0.5) * (s.mu_b - 0.5)) / (s.pa * s.pb);
  if (rad < 0) throw InputError("negative radicand: learning cost below the admissible interval");
  return s.mu_b + 0.5 - std::sqrt(rad);
}

double conditional_payoff(int learn_first, double x, bool learn_second, double p1, double p2,
                          const TwoUnivParams& pr) {
  Side s = side(learn_first, p1, p2, pr);
  return payoff_poly(payoff_case(x, s), learn_second, s, pr.k)(x);
}

double payoff_difference(int learn_first, double x, double p1, double p2, const TwoUnivParams& pr) {
  Side s = side(learn_first, p1, p2, pr);
  return difference_poly(payoff_case(x, s), s, pr.k)(x);
}

std::pair<double, double> arrival_beliefs(ArrivalCase c, const TwoUnivParams& pr) {
  switch (c) {
    case ArrivalCase::None: return {pr.p1_0, pr.p2_0};
    case ArrivalCase::One: return {1.0, pr.p2_0};
    case ArrivalCase::Two: return {pr.p1_0, 1.0};
    default: return {1.0, 1.0};
  }
}

std::pair<double, double> first_offer_beliefs(ArrivalCase c, const TwoUnivParams& pr) {
  switch (c) {
    case ArrivalCase::One:
    case ArrivalCase::OneTwo: return {1.0, pr.p2_0};
    case ArrivalCase::Two:
    case ArrivalCase::TwoOne: return {pr.p1_0, 1.0};
    default: return {pr.p1_0, pr.p2_0};
  }
}

double plan_welfare(const Plan& plan, const TwoUnivParams& pr) {
  if (plan.first == 0) return no_learning_value(plan.p1, plan.p2, pr);
  Side s = side(plan.first, plan.p1, plan.p2, pr);
  const double lo = s.mu_a - 0.5, hi = s.mu_a + 0.5;
  double gross = piecewise(lo, hi, {0.0, s.mu_b, s.mu_b + 0.5, plan.threshold}, [&](double a, double b) {
    double mid = 0.5 * (a + b);
    return payoff_poly(payoff_case(mid, s), mid < plan.threshold, s, pr.k).integral(a, b);
  });
  return gross - pr.k;
}

std::pair<double, double> plan_learning(const Plan& plan, const TwoUnivParams& pr) {
  if (plan.first == 0) return {0.0, 0.0};
  if (plan.first == 1) return {1.0, clamp01(plan.threshold - (pr.mu1 - 0.5))};
  return {clamp01(plan.threshold - (pr.mu2 - 0.5)), 1.0};
}

std::pair<double, double> plan_top_rank(const Plan& plan, const TwoUnivParams& pr) {
  if (plan.first == 0) return {1.0, 0.0};
  Side s = side(plan.first, plan.p1, plan.p2, pr);
  const double lo = s.mu_a - 0.5, hi = s.mu_a + 0.5;
  const double T = plan.threshold;
  // integrands are linear between cuts, so the midpoint rule is exact
  auto top_a = [&](double x) {
    if (x < T) return x <= 0 ? 0.0 : clamp01(x - (s.mu_b - 0.5));
    return x > s.mu_b ? 1.0 : 0.0;
  };
  auto top_b = [&](double x) {
    if (x < T) return clamp01(s.mu_b + 0.5 - std::max(0.0, x));
    return x > s.mu_b ? 0.0 : 1.0;
  };
  const std::vector<double> cuts{0.0, s.mu_b, s.mu_b - 0.5, s.mu_b + 0.5, T};
  double pa = piecewise(lo, hi, cuts, [&](double a, double b) { return (b - a) * top_a(0.5 * (a + b)); });
  double pb = piecewise(lo, hi, cuts, [&](double a, double b) { return (b - a) * top_b(0.5 * (a + b)); });
  return plan.first == 1 ? std::pair{pa, pb} : std::pair{pb, pa};
}

Plan optimal_plan(double p1, double p2, const TwoUnivParams& pr) {
  Plan best{0, 0.0, p1, p2};
  double best_v = plan_welfare(best, pr);
  for (int first : {1, 2}) {
    Plan cand{first, threshold_x_star(first, p1, p2, pr), p1, p2};
    double v = plan_welfare(cand, pr);
    if (v > best_v) {
      best = cand;
      best_v = v;
    }
  }
  return best;
}

Plan mechanism_plan(MechanismKind kind, ArrivalCase c, const TwoUnivParams& pr) {
  auto [e1, e2] = arrival_beliefs(c, pr);
  Plan plan;
  switch (kind) {
    case MechanismKind::DA:
      plan = optimal_plan(pr.p1_0, pr.p2_0, pr);
      break;
    case MechanismKind::Hybrid:
      plan = optimal_plan(e1, e2, pr);
      break;
    case MechanismKind::DoSV: {
      auto [f1, f2] = first_offer_beliefs(c, pr);
      plan = optimal_plan(f1, f2, pr);
      if (c == ArrivalCase::OneTwo || c == ArrivalCase::TwoOne) {
        // second offer: students who stopped re-optimize at (1,1) without unlearning
        if (plan.first == 0)
          plan = optimal_plan(1.0, 1.0, pr);
        else
          plan.threshold = std::max(plan.threshold, threshold_x_star(plan.first, 1.0, 1.0, pr));
      }
      break;
    }
  }
  plan.p1 = e1;
  plan.p2 = e2;
  return plan;
}

std::pair<double, double> learning_probabilities(MechanismKind kind, ArrivalCase c, const TwoUnivParams& pr) {
  return plan_learning(mechanism_plan(kind, c, pr), pr);
}

std::pair<double, double> top_rank_probabilities(MechanismKind kind, ArrivalCase c, const TwoUnivParams& pr) {
  return plan_top_rank(mechanism_plan(kind, c, pr), pr);
}

double conditional_welfare(MechanismKind kind, ArrivalCase c, const TwoUnivParams& pr) {
  return plan_welfare(mechanism_plan(kind, c, pr), pr);
}

std::array<double, 6> early_offer_effects(const TwoUnivParams& pr) {
  auto top = [&](ArrivalCase c) { return top_rank_probabilities(MechanismKind::DoSV, c, pr); };
  auto n = top(ArrivalCase::None), o1 = top(ArrivalCase::One), o2 = top(ArrivalCase::Two);
  auto o12 = top(ArrivalCase::OneTwo), o21 = top(ArrivalCase::TwoOne);
  return {o1.first - n.first,     o12.first - o2.first,  o21.first - o2.first,
          o2.second - n.second,   o12.second - o1.second, o21.second - o1.second};
}

std::array<double, 6> early_offer_effects_closed_form(double k) {
  return {175.0 / 2048 - 112 * k / 81, 25 * k / 9 - 1.0 / 2048, 7 * k / 9,
          400 * k / 81 - 44.0 / 512,   7 * k / 9,               25 * k / 9 - 1.0 / 2048};
}

std::array<double, 2> first_offer_effects(const TwoUnivParams& pr) {
  auto o12 = top_rank_probabilities(MechanismKind::DoSV, ArrivalCase::OneTwo, pr);
  auto o21 = top_rank_probabilities(MechanismKind::DoSV, ArrivalCase::TwoOne, pr);
  return {o12.first - o21.first, o21.second - o12.second};
}

std::vector<WelfareComparison> welfare_comparisons(const TwoUnivParams& pr) {
  constexpr double tol = 1e-12;
  std::vector<WelfareComparison> out;
  for (auto c : kAllCases) {
    double da = conditional_welfare(MechanismKind::DA, c, pr);
    double dosv = conditional_welfare(MechanismKind::DoSV, c, pr);
    double hyb = conditional_welfare(MechanismKind::Hybrid, c, pr);
    WelfareComparison w{c, hyb - da, hyb - dosv, dosv - da, false};
    bool hybrid_dominates = w.hybrid_minus_da >= -tol && w.hybrid_minus_dosv >= -tol;
    switch (c) {
      case ArrivalCase::None:
        w.signs_ok = std::abs(w.hybrid_minus_da) <= tol && std::abs(w.hybrid_minus_dosv) <= tol &&
                     std::abs(w.dosv_minus_da) <= tol;
        break;
      case ArrivalCase::TwoOne:
        w.signs_ok = hybrid_dominates && w.dosv_minus_da < 0 && w.hybrid_minus_dosv > 0;
        break;
      default:
        w.signs_ok = hybrid_dominates && w.dosv_minus_da > 0;
    }
    out.push_back(w);
  }
  return out;
}

double dosv_welfare_closed_form(ArrivalCase c, double k) {
  const double r = k * std::sqrt(2 * k);
  switch (c) {
    case ArrivalCase::One: return 8 * r / 9 - 63 * k / 32 + 217041.0 / 1048576;
    case ArrivalCase::Two: return 8 * r / 9 - 65 * k / 32 + 52301.0 / 262144;
    case ArrivalCase::OneTwo: return 2 * r / 3 - 63 * k / 32 + 48155.0 / 196608;
    case ArrivalCase::TwoOne: return 2 * r / 3 - 65 * k / 32 + 4013.0 / 16384;
    default: return da_welfare_closed_form(c, k);
  }
}

double da_welfare_closed_form(ArrivalCase c, double k) {
  const double s = std::sqrt(524288 * k - 14175);
  switch (c) {
    case ArrivalCase::None: return k * s / 432 - 525 * s / 8388608 - 63 * k / 32 + 1260909.0 / 8388608;
    case ArrivalCase::One: return k * s / 288 - s * s * s / 254803968 - 63 * k / 32 + 217041.0 / 1048576;
    case ArrivalCase::Two: return 11 * k * s / 7776 - 175 * s / 1572864 - 63 * k / 32 + 103813.0 / 524288;
    default: return k * s / 288 - s * s * s / 143327232 - 63 * k / 32 + 48155.0 / 196608;
  }
}

CounterexampleEffects counterexample_effects(double mu1, double delta, double p1_0, double p2_0, double k) {
  if (!(mu1 > 0.5 && mu1 < 1.0)) throw InputError("mu1 must lie in (1/2, 1)");
  if (!(delta > 0.0 && delta < k / 2)) throw InputError("need 0 < delta < k/2");
  if (!(p1_0 > 0.0 && p1_0 < p2_0 && p2_0 < 1.0)) throw InputError("need 0 < p1 < p2 < 1");
  const double gap = (1 - mu1) * (1 - mu1);
  // Learning X1 is worth at most E|X1 - mu1| = delta/2 < k, so only X2 is ever learned.
  auto v0 = [&](double p1, double p2) { return p1 * mu1 + (1 - p1) * p2 / 2; };
  auto v1 = [&](double p1, double p2) { return v0(p1, p2) + p1 * p2 * gap / 2 - k; };
  auto learns = [&](double p1, double p2) { return v1(p1, p2) > v0(p1, p2); };

  auto learned = [&](ArrivalCase c) {
    switch (c) {
      case ArrivalCase::None: return learns(p1_0, p2_0);
      case ArrivalCase::One: return learns(1, p2_0);
      case ArrivalCase::Two: return learns(p1_0, 1);
      case ArrivalCase::OneTwo: return learns(1, p2_0) || learns(1, 1);
      case ArrivalCase::TwoOne: return learns(p1_0, 1) || learns(1, 1);
    }
    return false;
  };
  // After learning x2 ~ U(0,1) the list is 1-2 iff x2 < mu1; otherwise always 1-2.
  auto top1 = [&](ArrivalCase c) { return learned(c) ? mu1 : 1.0; };
  auto top2 = [&](ArrivalCase c) { return learned(c) ? 1.0 - mu1 : 0.0; };

  using A = ArrivalCase;
  CounterexampleEffects out;
  out.early = {top1(A::One) - top1(A::None), top1(A::TwoOne) - top1(A::Two), top2(A::Two) - top2(A::None),
               top2(A::OneTwo) - top2(A::One)};
  out.first = {top1(A::OneTwo) - top1(A::TwoOne), top2(A::TwoOne) - top2(A::OneTwo)};
  out.k_in_window = p1_0 * gap / 2 < k && k < p2_0 * gap / 2;
  return out;
}

namespace {

struct Moments {
  std::uint64_t n = 0;
  double mean = 0.0, m2 = 0.0;

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  static Moments merge(const Moments& a, const Moments& b) {
    if (a.n == 0) return b;
    if (b.n == 0) return a;
    Moments out;
    out.n = a.n + b.n;
    double d = b.mean - a.mean;
    double w = static_cast<double>(b.n) / static_cast<double>(out.n);
    out.mean = a.mean + d * w;
    out.m2 = a.m2 + b.m2 + d * d * static_cast<double>(a.n) * w;
    return out;
  }
  McEstimate estimate() const {
    double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(std::max<std::uint64_t>(n, 1)))};
  }
};

struct ShardStats {
  std::array<Moments, 5> m;
};

ShardStats merge(const ShardStats& a, const ShardStats& b) {
  ShardStats out;
  for (std::size_t i = 0; i < 5; ++i) out.m[i] = Moments::merge(a.m[i], b.m[i]);
  return out;
}

ShardStats pairwise(const std::vector<ShardStats>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return v[lo];
  std::size_t mid = lo + (hi - lo) / 2;
  return merge(pairwise(v, lo, mid), pairwise(v, mid, hi));
}

constexpr std::size_t kShards = 64;

}  // namespace

McResult mc_oracle_plan(const Plan& plan, const TwoUnivParams& pr, std::uint64_t n_draws, const RngStream& stream,
                        int threads) {
  if (n_draws < 10000) throw InputError("Monte Carlo oracle needs at least 1e4 draws");
  std::vector<ShardStats> shards(kShards);
  auto run_shard = [&](std::size_t sh) {
    RngStream rng = stream.fork(sh);
    std::uint64_t n = n_draws / kShards + (sh < n_draws % kShards ? 1 : 0);
    ShardStats st;
    for (std::uint64_t d = 0; d < n; ++d) {
      double x[3] = {0.0, pr.mu1 - 0.5 + rng.uniform(), pr.mu2 - 0.5 + rng.uniform()};
      double mean[3] = {0.0, pr.mu1, pr.mu2};
      bool learned[3] = {false, false, false};
      if (plan.first != 0) {
        int other = 3 - plan.first;
        learned[plan.first] = true;
        learned[other] = x[plan.first] < plan.threshold;
      }
      double v1 = learned[1] ? x[1] : mean[1];
      double v2 = learned[2] ? x[2] : mean[2];
      // list of acceptable programs by perceived value; payoff uses true qualities
      int order[2] = {1, 2};
      if (v2 > v1) std::swap(order[0], order[1]);
      double v[3] = {0.0, v1, v2};
      double p[3] = {0.0, plan.p1, plan.p2};
      double pay = 0.0, reach = 1.0;
      int top = 0;
      for (int j : order) {
        if (!(v[j] > 0.0)) continue;
        if (top == 0) top = j;
        pay += reach * p[j] * x[j];
        reach *= 1 - p[j];
      }
      pay -= pr.k * ((learned[1] ? 1 : 0) + (learned[2] ? 1 : 0));
      st.m[0].add(learned[1] ? 1.0 : 0.0);
      st.m[1].add(learned[2] ? 1.0 : 0.0);
      st.m[2].add(top == 1 ? 1.0 : 0.0);
      st.m[3].add(top == 2 ? 1.0 : 0.0);
      st.m[4].add(pay);
    }
    shards[sh] = st;
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(kShards)));
  if (workers == 1) {
    for (std::size_t sh = 0; sh < kShards; ++sh) run_shard(sh);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t sh = static_cast<std::size_t>(w); sh < kShards; sh += static_cast<std::size_t>(workers))
          run_shard(sh);
      });
    for (auto& t : pool) t.join();
  }
  ShardStats total = pairwise(shards, 0, shards.size());
  McResult out;
  out.learn1 = total.m[0].estimate();
  out.learn2 = total.m[1].estimate();
  out.top1 = total.m[2].estimate();
  out.top2 = total.m[3].estimate();
  out.welfare = total.m[4].estimate();
  out.draws = n_draws;
  return out;
}

McResult mc_oracle(MechanismKind kind, ArrivalCase c, const TwoUnivParams& pr, std::uint64_t n_draws,
                   const RngStream& stream, int threads) {
  return mc_oracle_plan(mechanism_plan(kind, c, pr), pr, n_draws, stream, threads);
}

}  // namespace matchlab::two_univ
