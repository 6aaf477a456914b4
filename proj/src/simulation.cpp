#include "matchlab/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <numbers>
#include <thread>

#include "matchlab/csv.hpp"

namespace matchlab::sim {

void SimConfig::check() const {
  if (n_students < 1 || n_programs < 1 || n_samples < 1) throw InputError("n_students, n_programs, n_samples must be >= 1");
  if (min_applications < 1 || max_applications < min_applications)
    throw InputError("need 1 <= min_applications <= max_applications");
  if (!(v_program_sd > 0 && v_student_sd > 0 && se_scale > 0)) throw InputError("utility scales must be positive");
  if (capacity_rule == CapacityRule::Share && !(capacity_share > 0)) throw InputError("capacity_share must be positive");
  if (capacity_rule == CapacityRule::Fixed && capacity_fixed < 1) throw InputError("capacity_fixed must be >= 1");
  if (!(early_offer_share >= 0 && early_offer_share <= 1)) throw InputError("early_offer_share must lie in [0,1]");
}

const UtilityBase& SimMarket::utility(int student, int program) const {
  auto it = base.find({student, program});
  if (it == base.end())
    throw InputError("no utility base for student " + std::to_string(student) + ", program " + std::to_string(program));
  return it->second;
}

double program_score(double abitur, double nu) { return (abitur + nu) / 2; }

std::map<int, std::vector<int>> derive_early_offers(const MarketInstance& m, const std::set<int>& early_programs) {
  std::map<int, std::vector<int>> out;
  for (const auto& s : m.students) out[s.id];
  for (int k : early_programs) {
    const auto* p = m.find_program(k);
    if (!p) throw InputError("early program " + std::to_string(k) + " is not in the market");
    const auto& list = m.ranking(k);
    auto n = std::min<std::size_t>(static_cast<std::size_t>(p->capacity), list.size());
    for (std::size_t r = 0; r < n; ++r) out[list[r]].push_back(k);
  }
  for (auto& [i, v] : out) std::sort(v.begin(), v.end());
  return out;
}

namespace {

std::vector<int> by_descending(const std::vector<int>& items, const std::map<int, double>& value) {
  std::vector<int> out = items;
  std::stable_sort(out.begin(), out.end(), [&](int a, int b) {
    double va = value.at(a), vb = value.at(b);
    return va != vb ? va > vb : a < b;
  });
  return out;
}

}  // namespace

SimMarket generate_market(const SimConfig& cfg, RngStream stream) {
  cfg.check();
  SimMarket sm;
  auto& m = sm.market;
  const int K = cfg.n_programs, I = cfg.n_students;

  RngStream prog_rng = stream.fork(1);
  int cap = cfg.capacity_rule == CapacityRule::Fixed
                ? cfg.capacity_fixed
                : std::max(1, static_cast<int>(std::lround(cfg.capacity_share * I / K)));
  m.programs.push_back({kOutsideOption, 0});
  std::vector<double> effect(static_cast<std::size_t>(K + 1), 0.0);
  for (int k = 1; k <= K; ++k) {
    m.programs.push_back({k, cap});
    effect[static_cast<std::size_t>(k)] = cfg.v_program_sd * prog_rng.normal();
  }

  std::map<std::pair<int, int>, double> score;
  for (int i = 1; i <= I; ++i) {
    RngStream rng = stream.fork(2).fork(static_cast<std::uint64_t>(i));
    StudentProfile s;
    s.id = i;
    s.abitur = rng.uniform();
    int span = cfg.max_applications - cfg.min_applications + 1;
    int n = std::min(K, cfg.min_applications + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))));
    std::vector<int> pool(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) pool[static_cast<std::size_t>(k)] = k + 1;
    rng.shuffle(pool);
    s.applications.assign(pool.begin(), pool.begin() + n);
    s.applications.push_back(kOutsideOption);
    for (int k : s.applications) {
      double mean = k == kOutsideOption ? cfg.v_outside_mean : effect[static_cast<std::size_t>(k)];
      sm.base[{i, k}] = {mean + cfg.v_student_sd * rng.normal(), cfg.se_scale * (0.5 + rng.uniform())};
      if (k != kOutsideOption) score[{i, k}] = program_score(s.abitur, rng.uniform());
    }
    m.students.push_back(std::move(s));
  }

  // Reference match: every applicant acceptable, lists by V^FullInfo.
  std::map<int, std::vector<std::pair<double, int>>> applicants;
  for (const auto& s : m.students)
    for (int k : s.applications)
      if (k != kOutsideOption) applicants[k].push_back({score.at({s.id, k}), s.id});
  auto ranked = [&](const std::function<bool(int, int)>& keep) {
    std::map<int, std::vector<int>> out;
    for (auto [k, list] : applicants) {
      std::sort(list.begin(), list.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
      std::vector<int> ids;
      for (auto [sc, i] : list)
        if (keep(i, k)) ids.push_back(i);
      if (!ids.empty()) out[k] = std::move(ids);
    }
    return out;
  };
  MarketInstance ref = m;
  ref.rankings = ranked([](int, int) { return true; });
  RolMap ref_rols;
  for (const auto& s : m.students) {
    std::map<int, double> v;
    for (int k : s.applications) v[k] = sm.base.at({s.id, k}).v_full;
    ref_rols[s.id] = by_descending(s.applications, v);
  }
  Matching ref_match = gs_program_proposing(ref, ref_rols);
  auto feasible = compute_expost_feasible(ref, ref_match);

  for (const auto& s : m.students) {
    auto& F = sm.extended_feasible[s.id];
    for (int k : feasible[s.id])
      if (k != kOutsideOption) F.insert(k);
    // plus the infeasible program the student came closest to
    std::optional<int> closest;
    double best_gap = 0.0;
    for (int k : s.applications) {
      if (k == kOutsideOption || F.count(k)) continue;
      const auto& adm = ref_match.admitted[k];
      if (adm.empty()) continue;
      double gap = score.at({adm.back(), k}) - score.at({s.id, k});
      if (!closest || gap < best_gap) {
        closest = k;
        best_gap = gap;
      }
    }
    if (closest) F.insert(*closest);
  }
  m.rankings = ranked([&](int i, int k) { return sm.extended_feasible.at(i).count(k) > 0; });

  RngStream early_rng = stream.fork(3);
  std::vector<int> progs(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) progs[static_cast<std::size_t>(k)] = k + 1;
  early_rng.shuffle(progs);
  auto n_early = static_cast<std::size_t>(std::lround(cfg.early_offer_share * K));
  sm.early_programs.insert(progs.begin(), progs.begin() + static_cast<std::ptrdiff_t>(n_early));
  sm.early_offers = derive_early_offers(m, sm.early_programs);
  return sm;
}

void write_sim_market(const std::filesystem::path& dir, const SimMarket& sm) {
  write_market_csv(dir, sm.market);
  CsvTable base{{"student_id", "program_id", "v_full", "se_full", "extended_feasible"}, {}};
  for (const auto& [key, b] : sm.base) {
    bool f = sm.extended_feasible.count(key.first) && sm.extended_feasible.at(key.first).count(key.second);
    base.rows.push_back({std::to_string(key.first), std::to_string(key.second), format_double(b.v_full),
                         format_double(b.se_full), f ? "1" : "0"});
  }
  write_csv(dir / "utility_base.csv", base);
  CsvTable early{{"program_id"}, {}};
  for (int k : sm.early_programs) early.rows.push_back({std::to_string(k)});
  write_csv(dir / "early_programs.csv", early);
}

SimMarket read_sim_market(const std::filesystem::path& dir) {
  SimMarket sm;
  sm.market = read_market_csv(dir);
  auto violations = validate_market(sm.market);
  if (!violations.empty()) throw InputError("invalid market: " + violations.front().rule);
  auto base = read_csv(dir / "utility_base.csv");
  auto cs = base.column("student_id"), cp = base.column("program_id"), cv = base.column("v_full"),
       ce = base.column("se_full"), cf = base.column("extended_feasible");
  for (const auto& s : sm.market.students) sm.extended_feasible[s.id];
  for (const auto& r : base.rows) {
    int i = static_cast<int>(parse_int(r[cs])), k = static_cast<int>(parse_int(r[cp]));
    UtilityBase b{parse_double(r[cv]), parse_double(r[ce])};
    if (!(b.se_full > 0)) throw InputError("se_full must be positive");
    sm.base[{i, k}] = b;
    if (parse_int(r[cf]) == 1) sm.extended_feasible[i].insert(k);
  }
  for (const auto& s : sm.market.students)
    for (int k : s.applications) sm.utility(s.id, k);
  auto early = read_csv(dir / "early_programs.csv");
  auto ck = early.column("program_id");
  for (const auto& r : early.rows) sm.early_programs.insert(static_cast<int>(parse_int(r[ck])));
  sm.early_offers = derive_early_offers(sm.market, sm.early_programs);
  return sm;
}

std::vector<int> learning_sequence(MechanismKind kind, const std::vector<int>& da_order,
                                   const std::vector<int>& arrivals) {
  std::set<int> all(da_order.begin(), da_order.end());
  if (all.size() != da_order.size()) throw InputError("learning order repeats a program");
  std::set<int> early(arrivals.begin(), arrivals.end());
  if (early.size() != arrivals.size()) throw InputError("arrival order repeats a program");
  for (int k : arrivals)
    if (!all.count(k)) throw InputError("early offer from a program outside the application set");
  if (arrivals.empty() || kind == MechanismKind::DA) return da_order;

  std::vector<int> omega;
  if (kind == MechanismKind::Hybrid) {
    for (int k : da_order)
      if (early.count(k)) omega.push_back(k);
    for (int k : da_order)
      if (!early.count(k)) omega.push_back(k);
    return omega;
  }

  std::set<int> learned;
  auto learn = [&](int k) {
    omega.push_back(k);
    learned.insert(k);
  };
  auto earliest_unlearned = [&] {
    for (int k : da_order)
      if (!learned.count(k)) return k;
    return -1;
  };
  std::size_t L = 0;  // index of the latest early offer; may run past the end
  learn(arrivals[0]);
  while (omega.size() < da_order.size()) {
    if (L < arrivals.size() && omega.back() == arrivals[L]) {
      learn(earliest_unlearned());
      continue;
    }
    ++L;
    if (L < arrivals.size() && !learned.count(arrivals[L]))
      learn(arrivals[L]);
    else
      learn(earliest_unlearned());
  }
  return omega;
}

std::map<int, int> learning_outcomes(const std::vector<int>& omega) {
  std::map<int, int> out;
  const std::size_t budget = omega.size() / 2;
  for (std::size_t r = 0; r < omega.size(); ++r) {
    if (out.count(omega[r])) throw InputError("learning order repeats a program");
    out[omega[r]] = r < budget ? 1 : 0;
  }
  return out;
}

double perceived_utility(const UtilityPair& pair, bool learned) { return learned ? pair.u_full() : pair.u_noinfo(); }

std::string to_string(Arm a) {
  switch (a) {
    case Arm::FullInfo: return "full_info";
    case Arm::DA: return "da";
    case Arm::DoSV: return "dosv";
    case Arm::Hybrid: return "hybrid";
  }
  return "?";
}

Arm arm_of(MechanismKind k) {
  switch (k) {
    case MechanismKind::DA: return Arm::DA;
    case MechanismKind::DoSV: return Arm::DoSV;
    case MechanismKind::Hybrid: return Arm::Hybrid;
  }
  return Arm::DA;
}

SampleDetail run_sample(const SimMarket& sm, const std::set<Arm>& arms, const RngStream& stream, int s) {
  const auto& m = sm.market;
  SampleDetail d;
  RngStream ss = stream.fork(static_cast<std::uint64_t>(s));
  for (const auto& st : m.students) {
    RngStream si = ss.fork(static_cast<std::uint64_t>(st.id));
    RngStream shocks = si.fork(1), orders = si.fork(2);
    for (int k : st.applications) {
      const auto& b = sm.utility(st.id, k);
      UtilityPair u{b.v_full, b.se_full, 0.0, 0.0, 0.0};
      u.eps_full = gumbel_draw(shocks);
      u.eps_noinfo = gumbel_draw(shocks);
      u.v_noinfo = b.v_full + b.se_full * shocks.normal();
      d.utilities[{st.id, k}] = u;
    }
    auto& da = d.da_order[st.id] = st.applications;
    orders.shuffle(da);
    auto& arr = d.arrival_order[st.id] = sm.early_offers.count(st.id) ? sm.early_offers.at(st.id) : std::vector<int>{};
    orders.shuffle(arr);
    d.omega_dosv[st.id] = learning_sequence(MechanismKind::DoSV, da, arr);
    d.omega_hybrid[st.id] = learning_sequence(MechanismKind::Hybrid, da, arr);
  }

  for (Arm a : arms) {
    ArmOutcome out;
    for (const auto& st : m.students) {
      std::map<int, double> perceived;
      if (a == Arm::FullInfo) {
        for (int k : st.applications) perceived[k] = d.utilities.at({st.id, k}).u_full();
      } else {
        const auto& omega = a == Arm::DA     ? d.da_order.at(st.id)
                            : a == Arm::DoSV ? d.omega_dosv.at(st.id)
                                             : d.omega_hybrid.at(st.id);
        auto lambda = learning_outcomes(omega);
        for (int k : st.applications) perceived[k] = perceived_utility(d.utilities.at({st.id, k}), lambda.at(k) == 1);
        out.lambda[st.id] = std::move(lambda);
      }
      out.rols[st.id] = by_descending(st.applications, perceived);
    }
    out.matching = gs_program_proposing(m, out.rols);
    d.arms[a] = std::move(out);
  }
  return d;
}

double realized_utility(const SimMarket& sm, const SampleDetail& d, int student, std::optional<int> program) {
  if (program) return d.utilities.at({student, *program}).u_full();
  const auto& F = sm.extended_feasible.at(student);
  if (F.empty()) throw InputError("student " + std::to_string(student) + " has an empty extended feasible set");
  double lo = INFINITY;
  for (int k : F) lo = std::min(lo, d.utilities.at({student, k}).u_full());
  return lo - std::numbers::pi / std::sqrt(6.0);
}

bool ranks_feasible_in_true_order(const SimMarket&, const SampleDetail& d, int student, const RankOrderList& rol,
                                  const std::set<int>& expost_feasible) {
  double prev = INFINITY;
  for (int k : rol) {
    if (!expost_feasible.count(k)) continue;
    double u = d.utilities.at({student, k}).u_full();
    if (!(u < prev)) return false;
    prev = u;
  }
  return true;
}

SimResults run_samples(const SimMarket& sm, const std::set<MechanismKind>& kinds, int n_samples,
                       const RngStream& stream, int threads, const SampleObserver& observe) {
  if (n_samples < 1) throw InputError("n_samples must be >= 1");
  SimResults res;
  res.arms.insert(Arm::FullInfo);
  for (auto k : kinds) res.arms.insert(arm_of(k));
  res.samples = n_samples;
  for (const auto& s : sm.market.students) res.students.push_back(s.id);
  const std::size_t I = res.students.size(), S = static_cast<std::size_t>(n_samples);
  for (Arm a : res.arms) {
    auto& as = res.data[a];
    as.matched.assign(S, std::vector<int>(I, -1));
    as.utility.assign(S, std::vector<double>(I, 0.0));
    as.ordered.assign(S, std::vector<char>(I, 0));
    as.stable.assign(S, 0);
  }

  auto work = [&](int s) {
    SampleDetail d = run_sample(sm, res.arms, stream, s);
    if (observe) observe(s, d);
    for (Arm a : res.arms) {
      const auto& out = d.arms.at(a);
      auto feasible = compute_expost_feasible(sm.market, out.matching);
      auto& as = res.data.at(a);
      as.stable[static_cast<std::size_t>(s)] = is_stable(sm.market, out.rols, out.matching).stable;
      for (std::size_t n = 0; n < I; ++n) {
        int i = res.students[n];
        auto prog = out.matching.program_of(i);
        as.matched[static_cast<std::size_t>(s)][n] = prog ? *prog : -1;
        as.utility[static_cast<std::size_t>(s)][n] = realized_utility(sm, d, i, prog);
        as.ordered[static_cast<std::size_t>(s)][n] = ranks_feasible_in_true_order(sm, d, i, out.rols.at(i), feasible[i]);
      }
    }
  };

  const int workers = std::max(1, std::min(threads, n_samples));
  if (workers == 1) {
    for (int s = 0; s < n_samples; ++s) work(s);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int s = next++; s < n_samples; s = next++) work(s);
      });
    for (auto& t : pool) t.join();
  }
  return res;
}

ComparisonStats compare(const SimResults& results) {
  if (results.arms.size() < 2) throw InputError("comparison needs at least two arms");
  ComparisonStats st;
  const std::size_t I = results.students.size(), S = static_cast<std::size_t>(results.samples);
  for (Arm a : results.arms) {
    const auto& as = results.data.at(a);
    if (as.utility.size() != S) throw InputError("mismatched sample sets");
    double ordered = 0.0;
    std::vector<double> eu(I, 0.0);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t n = 0; n < I; ++n) {
        ordered += as.ordered[s][n];
        eu[n] += as.utility[s][n];
      }
    for (auto& x : eu) x /= static_cast<double>(S);
    st.theta[a] = ordered / static_cast<double>(S * I);
    st.eu[a] = std::move(eu);
  }
  const std::pair<Arm, Arm> pairs[] = {
      {Arm::FullInfo, Arm::DA}, {Arm::DoSV, Arm::DA}, {Arm::Hybrid, Arm::DA}, {Arm::Hybrid, Arm::DoSV}};
  for (auto [a, b] : pairs) {
    if (!results.arms.count(a) || !results.arms.count(b)) continue;
    std::size_t better = 0, worse = 0, equal = 0;
    for (std::size_t n = 0; n < I; ++n) {
      double x = st.eu[a][n], y = st.eu[b][n];
      if (x > y)
        ++better;
      else if (x < y)
        ++worse;
      else
        ++equal;
    }
    double denom = static_cast<double>(I);
    st.pi.push_back({to_string(a) + "_vs_" + to_string(b),
                     {static_cast<double>(better) / denom, static_cast<double>(worse) / denom,
                      static_cast<double>(equal) / denom}});
  }
  return st;
}

void write_theta_csv(const std::filesystem::path& path, const ComparisonStats& stats) {
  CsvTable t{{"mechanism", "theta"}, {}};
  for (const auto& [a, th] : stats.theta) t.rows.push_back({to_string(a), format_double(th)});
  write_csv(path, t);
}

void write_eu_csv(const std::filesystem::path& path, const ComparisonStats& stats, const std::vector<int>& students) {
  CsvTable t{{"student_id", "mechanism", "eu"}, {}};
  for (std::size_t n = 0; n < students.size(); ++n)
    for (const auto& [a, eu] : stats.eu) t.rows.push_back({std::to_string(students[n]), to_string(a), format_double(eu[n])});
  write_csv(path, t);
}

void write_pi_csv(const std::filesystem::path& path, const ComparisonStats& stats) {
  CsvTable t{{"pair", "better", "worse", "equal"}, {}};
  for (const auto& [name, p] : stats.pi)
    t.rows.push_back({name, format_double(p.better), format_double(p.worse), format_double(p.equal)});
  write_csv(path, t);
}

}  // namespace matchlab::sim
