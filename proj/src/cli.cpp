#include "matchlab/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

#include "matchlab/choice.hpp"
#include "matchlab/config.hpp"
#include "matchlab/csv.hpp"
#include "matchlab/simulation.hpp"
#include "matchlab/two_univ.hpp"

namespace matchlab {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

namespace fs = std::filesystem;
namespace tu = two_univ;

/// A failed verification or run-time invariant; maps to exit code 1.
struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Manifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
};

void write_manifest(const fs::path& out, const Manifest& m, std::chrono::steady_clock::time_point start) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["artifact_version"] = kArtifactVersion;
  j["outputs"] = m.outputs;
  j["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fs::path tmp = out / "manifest.json.tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw InputError("cannot write " + tmp.string());
    f << j.dump(2) << '\n';
  }
  fs::rename(tmp, out / "manifest.json");
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("MATCHLAB_THREADS")) {
    long long n = parse_int(env);
    if (n < 1) throw InputError("MATCHLAB_THREADS must be a positive integer");
    return static_cast<int>(n);
  }
  return 1;
}

/// "num/den", a decimal, or "grid" (nullopt).
std::optional<double> parse_k(const std::string& s) {
  if (s == "grid") return std::nullopt;
  auto slash = s.find('/');
  if (slash == std::string::npos) return parse_double(s);
  long long num = parse_int(s.substr(0, slash)), den = parse_int(s.substr(slash + 1));
  if (den <= 0) throw InputError("k denominator must be positive");
  return Rational{num, den}.value();
}

std::set<MechanismKind> parse_mechanisms(const std::string& s) {
  std::set<MechanismKind> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.insert(parse_mechanism(item));
  if (out.empty()) throw InputError("no mechanisms given");
  return out;
}

std::string fmt(double x) { return std::isnan(x) ? "" : format_double(x); }

// ---------------------------------------------------------------- verify

struct PlanKey {
  int first;
  double threshold, p1, p2;
  auto tie() const { return std::tie(first, threshold, p1, p2); }
  bool operator<(const PlanKey& o) const { return tie() < o.tie(); }
};

double mc_stat(const tu::McResult& r, tu::Statistic s, bool se) {
  const tu::McEstimate* e = nullptr;
  switch (s) {
    case tu::Statistic::LearnX1: e = &r.learn1; break;
    case tu::Statistic::LearnX2: e = &r.learn2; break;
    case tu::Statistic::Top1: e = &r.top1; break;
    case tu::Statistic::Top2: e = &r.top2; break;
    case tu::Statistic::Welfare: e = &r.welfare; break;
  }
  return se ? e->se : e->mean;
}

bool within_3se(double value, double mean, double se) {
  return se > 0 ? std::abs(value - mean) <= 3 * se : std::abs(value - mean) <= 1e-12;
}

struct SymbolicEntry {
  MechanismKind mechanism;
  tu::ArrivalCase arrival;
  tu::Statistic statistic;
  const char* expression;
  double (*value)(double k);
};

// Printed symbolic learning probabilities that disagree with the threshold derivation.
const SymbolicEntry kSymbolic[] = {
    {MechanismKind::DA, tu::ArrivalCase::None, tu::Statistic::LearnX2, "(45-sqrt(3(4096k-49)))/48",
     [](double k) { return (45 - std::sqrt(3 * (4096 * k - 49))) / 48; }},
    {MechanismKind::DoSV, tu::ArrivalCase::Two, tu::Statistic::LearnX1, "17/16-2sqrt(6k)/3",
     [](double k) { return 17.0 / 16 - 2 * std::sqrt(6 * k) / 3; }},
    {MechanismKind::DoSV, tu::ArrivalCase::TwoOne, tu::Statistic::LearnX1, "1-sqrt(2k)",
     [](double k) { return 1 - std::sqrt(2 * k); }},
    {MechanismKind::DoSV, tu::ArrivalCase::One, tu::Statistic::LearnX2, "15/16-2sqrt(k)",
     [](double k) { return 15.0 / 16 - 2 * std::sqrt(k); }},
    {MechanismKind::DoSV, tu::ArrivalCase::OneTwo, tu::Statistic::LearnX2, "15/16-sqrt(2k)",
     [](double k) { return 15.0 / 16 - std::sqrt(2 * k); }},
    {MechanismKind::Hybrid, tu::ArrivalCase::TwoOne, tu::Statistic::LearnX2, "15/16-sqrt(2k)",
     [](double k) { return 15.0 / 16 - std::sqrt(2 * k); }},
};

struct LemmaRow {
  std::string lemma, arrival;
  double k, value;
  bool ok;
};

std::vector<LemmaRow> lemma_rows(double k) {
  const auto pr = tu::TwoUnivParams::baseline(k);
  std::vector<LemmaRow> rows;
  static const char* kEarly[6] = {"univ1:O_1-O_none", "univ1:O_12-O_2", "univ1:O_21-O_2",
                                  "univ2:O_2-O_none", "univ2:O_12-O_1", "univ2:O_21-O_1"};
  auto e = tu::early_offer_effects(pr), cf = tu::early_offer_effects_closed_form(k);
  for (int i = 0; i < 6; ++i)
    rows.push_back({"early_offer_ranking", kEarly[i], k, e[static_cast<std::size_t>(i)],
                    e[static_cast<std::size_t>(i)] > 0 &&
                        std::abs(e[static_cast<std::size_t>(i)] - cf[static_cast<std::size_t>(i)]) <= 1e-12});
  auto f = tu::first_offer_effects(pr);
  const double target = 2 * k - 1.0 / 2048;
  rows.push_back({"first_offer_ranking", "univ1:O_12-O_21", k, f[0], f[0] > 0 && std::abs(f[0] - target) <= 1e-12});
  rows.push_back({"first_offer_ranking", "univ2:O_21-O_12", k, f[1], f[1] > 0 && std::abs(f[1] - target) <= 1e-12});
  for (const auto& w : tu::welfare_comparisons(pr)) {
    std::string c = tu::to_string(w.arrival);
    rows.push_back({"welfare_ordering", c + ":hybrid-da", k, w.hybrid_minus_da, w.signs_ok});
    rows.push_back({"welfare_ordering", c + ":hybrid-dosv", k, w.hybrid_minus_dosv, w.signs_ok});
    rows.push_back({"welfare_ordering", c + ":dosv-da", k, w.dosv_minus_da, w.signs_ok});
    double dosv_cf = tu::dosv_welfare_closed_form(w.arrival, k), da_cf = tu::da_welfare_closed_form(w.arrival, k);
    double dosv = tu::conditional_welfare(MechanismKind::DoSV, w.arrival, pr),
           da = tu::conditional_welfare(MechanismKind::DA, w.arrival, pr);
    rows.push_back({"welfare_ordering", c + ":dosv=closed_form", k, dosv - dosv_cf, std::abs(dosv - dosv_cf) <= 1e-12});
    rows.push_back({"welfare_ordering", c + ":da=closed_form", k, da - da_cf, std::abs(da - da_cf) <= 1e-12});
    if (w.arrival == tu::ArrivalCase::TwoOne)
      rows.push_back({"welfare_ordering", c + ":hybrid-dosv=k/16-1/196608", k, w.hybrid_minus_dosv,
                      std::abs(w.hybrid_minus_dosv - (k / 16 - 1.0 / 196608)) <= 1e-12});
  }
  return rows;
}

void cmd_verify(const std::string& k_arg, std::uint64_t mc_draws, std::uint64_t seed, int threads,
                const fs::path& out, Manifest& man) {
  const std::optional<double> k = parse_k(k_arg);
  const double k_default = tu::kDefaultK.value();
  const auto pr = tu::TwoUnivParams::baseline(k.value_or(k_default));
  pr.check();
  std::vector<double> grid = k ? std::vector<double>{*k} : tu::k_grid(pr);
  fs::create_directories(out);
  std::vector<std::string> failures;

  // MC oracle per distinct plan
  std::map<PlanKey, tu::McResult> mc;
  auto mc_for = [&](MechanismKind m, tu::ArrivalCase c) -> const tu::McResult& {
    auto plan = tu::mechanism_plan(m, c, pr);
    PlanKey key{plan.first, plan.threshold, plan.p1, plan.p2};
    auto it = mc.find(key);
    if (it == mc.end()) {
      RngStream stream(seed, {static_cast<std::uint64_t>(mc.size())});
      it = mc.emplace(key, tu::mc_oracle_plan(plan, pr, mc_draws, stream, threads)).first;
    }
    return it->second;
  };
  const bool run_mc = mc_draws > 0;

  CsvTable table{{"mechanism", "case", "statistic", "computed", "paper", "abs_err", "flagged"}, {}};
  CsvTable mc_table{{"mechanism", "case", "statistic", "closed_form", "mc_mean", "mc_se", "within_3se"}, {}};
  for (const auto& cell : tu::table1(pr)) {
    double err = std::abs(cell.computed - cell.published);
    table.rows.push_back({to_string(cell.mechanism), tu::to_string(cell.arrival), tu::to_string(cell.statistic),
                          fmt(cell.computed), fmt(cell.published), fmt(err), cell.flagged ? "1" : "0"});
    std::string label = to_string(cell.mechanism) + "/" + tu::to_string(cell.arrival) + "/" + tu::to_string(cell.statistic);
    bool in_tol = !std::isnan(cell.published) && err <= 0.05 + 1e-9;
    if (!std::isnan(cell.published) && !in_tol && !cell.flagged) failures.push_back("table1 " + label);
    if (run_mc) {
      const auto& r = mc_for(cell.mechanism, cell.arrival);
      double scale = tu::display_scale(cell.statistic);
      double mean = scale * mc_stat(r, cell.statistic, false), se = scale * mc_stat(r, cell.statistic, true);
      bool ok = within_3se(cell.computed, mean, se);
      mc_table.rows.push_back({to_string(cell.mechanism), tu::to_string(cell.arrival), tu::to_string(cell.statistic),
                               fmt(cell.computed), fmt(mean), fmt(se), ok ? "1" : "0"});
      if (!ok) failures.push_back("mc_oracle " + label);
    } else if (cell.flagged) {
      failures.push_back("table1 " + label + " flagged and unresolved without the Monte Carlo oracle");
    }
  }
  write_csv(out / "table1_reproduction.csv", table);
  man.outputs.push_back("table1_reproduction.csv");

  if (run_mc) {
    write_csv(out / "mc_oracle.csv", mc_table);
    man.outputs.push_back("mc_oracle.csv");
    CsvTable sym{{"mechanism", "case", "statistic", "printed_expression", "expression_value", "derived", "mc_mean",
                  "mc_se", "derived_within_3se", "expression_within_3se"},
                 {}};
    for (const auto& e : kSymbolic) {
      const auto& r = mc_for(e.mechanism, e.arrival);
      double mean = mc_stat(r, e.statistic, false), se = mc_stat(r, e.statistic, true);
      auto lp = tu::learning_probabilities(e.mechanism, e.arrival, pr);
      double derived = e.statistic == tu::Statistic::LearnX1 ? lp.first : lp.second;
      double expr = e.value(pr.k);
      bool d_ok = within_3se(derived, mean, se), x_ok = within_3se(expr, mean, se);
      sym.rows.push_back({to_string(e.mechanism), tu::to_string(e.arrival), tu::to_string(e.statistic), e.expression,
                          fmt(expr), fmt(derived), fmt(mean), fmt(se), d_ok ? "1" : "0", x_ok ? "1" : "0"});
      if (!d_ok) failures.push_back(std::string("symbolic entry ") + e.expression + ": derivation disagrees with oracle");
    }
    write_csv(out / "symbolic_entries.csv", sym);
    man.outputs.push_back("symbolic_entries.csv");
  }

  CsvTable lemmas{{"lemma", "case", "k", "value", "sign_ok"}, {}};
  for (double kk : grid)
    for (const auto& r : lemma_rows(kk)) {
      lemmas.rows.push_back({r.lemma, r.arrival, fmt(r.k), fmt(r.value), r.ok ? "1" : "0"});
      if (!r.ok) failures.push_back(r.lemma + " " + r.arrival + " at k=" + fmt(r.k));
    }
  write_csv(out / "lemma_signs.csv", lemmas);
  man.outputs.push_back("lemma_signs.csv");

  // mu1 = 3/4, delta = 1/200, p0 = (3/10, 4/5), k = 3/200
  const double mu1 = 0.75;
  auto ce = tu::counterexample_effects(mu1, 0.005, 0.3, 0.8, 0.015);
  CsvTable cex{{"effect", "value", "expected", "ok"}, {}};
  const char* names[6] = {"early:univ1:O_1-O_none", "early:univ1:O_21-O_2", "early:univ2:O_2-O_none",
                          "early:univ2:O_12-O_1",   "first:univ1:O_12-O_21", "first:univ2:O_21-O_12"};
  const double expected[6] = {mu1 - 1, mu1 - 1, 0, 0, 0, 0};
  for (int i = 0; i < 6; ++i) {
    double v = i < 4 ? ce.early[static_cast<std::size_t>(i)] : ce.first[static_cast<std::size_t>(i - 4)];
    bool ok = v == expected[i];
    cex.rows.push_back({names[i], fmt(v), fmt(expected[i]), ok ? "1" : "0"});
    if (!ok) failures.push_back(std::string("counterexample ") + names[i]);
  }
  // positive weights give a negative average iff no effect is positive and one is negative
  bool any_neg = false, any_pos = false;
  for (double v : ce.early) {
    any_neg |= v < 0;
    any_pos |= v > 0;
  }
  cex.rows.push_back({"weighted_average_negative", any_neg && !any_pos ? "1" : "0", "1", any_neg && !any_pos ? "1" : "0"});
  if (!any_neg || any_pos) failures.push_back("counterexample weighted average");
  write_csv(out / "counterexample.csv", cex);
  man.outputs.push_back("counterexample.csv");

  std::cout << "verify: " << table.rows.size() << " table cells, " << lemmas.rows.size() << " lemma rows, "
            << mc_table.rows.size() << " oracle comparisons, " << failures.size() << " failures\n";
  if (!failures.empty()) {
    for (const auto& f : failures) std::cerr << "FAIL " << f << '\n';
    throw CheckFailure("verification failed");
  }
}

// ---------------------------------------------------------------- simulate / gen-market

sim::SimMarket market_for(const sim::SimConfig& cfg, std::uint64_t seed, const std::string& market_dir) {
  if (!market_dir.empty()) return sim::read_sim_market(market_dir);
  return sim::generate_market(cfg, RngStream(seed, {1}));
}

void cmd_simulate(const sim::SimConfig& cfg, std::uint64_t seed, const std::string& mechanisms,
                  const std::string& market_dir, int threads, const fs::path& out, Manifest& man) {
  auto kinds = parse_mechanisms(mechanisms);
  auto sm = market_for(cfg, seed, market_dir);
  auto res = sim::run_samples(sm, kinds, cfg.n_samples, RngStream(seed, {2}), threads);
  auto stats = sim::compare(res);
  fs::create_directories(out);
  sim::write_theta_csv(out / "theta.csv", stats);
  sim::write_eu_csv(out / "eu.csv", stats, res.students);
  sim::write_pi_csv(out / "pi.csv", stats);
  man.outputs = {"theta.csv", "eu.csv", "pi.csv"};

  std::vector<std::string> problems;
  for (const auto& [name, p] : stats.pi)
    if (std::abs(p.better + p.worse + p.equal - 1.0) > 1e-12) problems.push_back("pi shares of " + name + " do not sum to 1");
  if (stats.theta.at(sim::Arm::FullInfo) != 1.0) problems.push_back("full-information theta differs from 1");
  for (const auto& [a, d] : res.data)
    for (std::size_t s = 0; s < d.stable.size(); ++s)
      if (!d.stable[s]) problems.push_back(sim::to_string(a) + " matching unstable in sample " + std::to_string(s));
  for (const auto& [a, th] : stats.theta) std::cout << "theta " << sim::to_string(a) << ' ' << fmt(th) << '\n';
  for (const auto& [name, p] : stats.pi)
    std::cout << "pi " << name << ' ' << fmt(p.better) << ' ' << fmt(p.worse) << ' ' << fmt(p.equal) << '\n';
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << "FAIL " << p << '\n';
    throw CheckFailure("simulation invariant violated");
  }
}

void cmd_gen_market(const sim::SimConfig& cfg, std::uint64_t seed, const fs::path& out, Manifest& man) {
  auto sm = sim::generate_market(cfg, RngStream(seed, {1}));
  sim::write_sim_market(out, sm);
  auto violations = validate_market(sm.market);
  if (!violations.empty()) throw CheckFailure("generated market violates " + violations.front().rule);
  man.outputs = {"students.csv", "programs.csv", "applications.csv", "rankings.csv", "utility_base.csv",
                 "early_programs.csv"};
  std::cout << "gen-market: " << sm.market.students.size() << " students, " << sm.market.programs.size()
            << " programs\n";
}

// ---------------------------------------------------------------- fit

void cmd_fit(const fs::path& data_path, const std::string& mode_name, const fs::path& out, Manifest& man) {
  const ChoiceMode mode = parse_choice_mode(mode_name);
  auto data = read_choice_csv(data_path);
  auto fit = fit_mle(data, mode, initial_params(data));
  fs::create_directories(out);
  write_fit_csv(out / "estimates.csv", fit);

  CsvTable rep{{"quantity", "value"}, {}};
  rep.rows.push_back({"mode", to_string(mode)});
  rep.rows.push_back({"events", std::to_string(fit.report.events)});
  rep.rows.push_back({"iterations", std::to_string(fit.report.iterations)});
  rep.rows.push_back({"grad_norm", fmt(fit.report.grad_norm)});
  rep.rows.push_back({"loglik", fmt(fit.report.loglik)});
  rep.rows.push_back({"converged", fit.report.converged ? "1" : "0"});
  write_csv(out / "fit_report.csv", rep);

  auto me = marginal_effect_early_offer(fit.params, data);
  CsvTable mt{{"quantity", "value"}, {}};
  mt.rows.push_back({"baseline_acceptance", fmt(me.baseline)});
  mt.rows.push_back({"delta_early_offer", fmt(me.early)});
  mt.rows.push_back({"delta_first_early_offer", fmt(me.first_early)});
  mt.rows.push_back({"rows", std::to_string(me.rows)});
  write_csv(out / "marginal_effects.csv", mt);

  double sum = 0.0;
  int n = 0;
  for (const auto& r : data.rows)
    if (r.feasible) {
      sum += r.distance_km;
      ++n;
    }
  const double at = n ? sum / n : 0.0;
  CsvTable dt{{"offer", "at_distance_km", "reduction_km"}, {}};
  const std::pair<const char*, double> offers[] = {
      {"early_offer", fit.params.coef("early_offer")},
      {"first_early_offer", fit.params.coef("early_offer") + fit.params.coef("first_early_offer")}};
  for (auto [name, du] : offers) {
    std::string v;
    try {
      v = fmt(distance_equivalent(fit.params, du, at));
    } catch (const InputError& e) {
      std::cerr << "distance equivalent of " << name << ": " << e.what() << '\n';
    }
    dt.rows.push_back({name, fmt(at), v});
  }
  write_csv(out / "distance_equivalents.csv", dt);
  man.outputs = {"estimates.csv", "fit_report.csv", "marginal_effects.csv", "distance_equivalents.csv"};

  std::cout << "fit: " << fit.report.iterations << " iterations, gradient " << fmt(fit.report.grad_norm)
            << ", log-likelihood " << fmt(fit.report.loglik) << '\n';
  if (!fit.report.converged) throw CheckFailure("optimizer did not converge");
}

void cmd_gen_choice_data(int students, int programs, int alternatives, std::uint64_t seed, const fs::path& out,
                         Manifest& man) {
  SyntheticChoiceConfig cfg;
  cfg.n_students = students;
  cfg.n_programs = programs;
  cfg.alternatives = alternatives;
  auto truth = synthetic_truth(programs);
  auto data = synthetic_choice_data(cfg, truth, RngStream(seed, {3}));
  fs::create_directories(out);
  write_choice_csv(out / "choice_data.csv", data);
  CsvTable t{{"name", "value"}, {}};
  for (std::size_t j = 0; j < truth.names.size(); ++j)
    t.rows.push_back({truth.names[j], fmt(truth.beta(static_cast<Eigen::Index>(j)))});
  write_csv(out / "truth.csv", t);
  man.outputs = {"choice_data.csv", "truth.csv"};
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::vector<std::string> copy = args;
  for (auto& a : copy) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

int run_cli(int argc, char** argv) {
  const auto start = std::chrono::steady_clock::now();
  CLI::App app{"matchlab: matching-with-learning verification, simulation and estimation"};
  app.require_subcommand(1);

  std::uint64_t seed = 1;
  int threads_flag = 0;
  std::string out = "out";
  auto add_common = [&](CLI::App* sub, bool with_seed) {
    if (with_seed) sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads_flag, "worker threads (default: MATCHLAB_THREADS or 1)");
    sub->add_option("--out", out, "output directory");
  };

  std::string k_arg = "3339/65536";
  std::uint64_t mc_draws = 10'000'000;
  auto* verify = app.add_subcommand("verify", "reproduce the two-university results");
  add_common(verify, true);
  verify->add_option("--k", k_arg, "learning cost as num/den, decimal, or 'grid'");
  verify->add_option("--mc-draws", mc_draws, "Monte Carlo draws per plan (0 disables the oracle)");

  std::string config_path, mechanisms = "da,dosv,hybrid", market_dir;
  auto* simulate = app.add_subcommand("simulate", "run the mechanism comparison simulation");
  add_common(simulate, true);
  simulate->add_option("--config", config_path, "key=value config file")->required();
  simulate->add_option("--mechanisms", mechanisms, "comma-separated subset of da,dosv,hybrid");
  simulate->add_option("--market-dir", market_dir, "read the market written by gen-market instead of generating");

  std::string data_path, mode = "acceptance";
  auto* fit = app.add_subcommand("fit", "fit the choice model to a dataset");
  add_common(fit, false);
  fit->add_option("--data", data_path, "dataset CSV")->required();
  fit->add_option("--mode", mode, "acceptance or ranked");

  auto* gen_market = app.add_subcommand("gen-market", "write a synthetic market as CSV");
  add_common(gen_market, true);
  gen_market->add_option("--config", config_path, "key=value config file")->required();

  int students = 5000, programs = 8, alternatives = 4;
  auto* gen_choice = app.add_subcommand("gen-choice-data", "write a synthetic choice dataset");
  add_common(gen_choice, true);
  gen_choice->add_option("--students", students);
  gen_choice->add_option("--programs", programs);
  gen_choice->add_option("--alternatives", alternatives);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const int threads = resolve_threads(threads_flag);
    Manifest man;
    fs::path out_dir = out;
    auto load_config = [&](bool seed_given) {
      std::string text = read_text_file(config_path);
      man.config_hash = sha256_hex(text);
      auto cfg = sim_config_from(parse_key_values(text));
      if (!seed_given) seed = cfg.seed;
      return cfg;
    };
    if (*verify) {
      man.command = "verify";
      man.config_hash = sha256_hex("k=" + k_arg + "\nmc_draws=" + std::to_string(mc_draws) + "\n");
      cmd_verify(k_arg, mc_draws, seed, threads, out_dir, man);
    } else if (*simulate) {
      man.command = "simulate";
      auto cfg = load_config(simulate->count("--seed") > 0);
      cmd_simulate(cfg, seed, mechanisms, market_dir, threads, out_dir, man);
    } else if (*fit) {
      man.command = "fit";
      man.config_hash = sha256_hex(read_text_file(data_path) + "\nmode=" + mode + "\n");
      seed = 0;
      cmd_fit(data_path, mode, out_dir, man);
    } else if (*gen_market) {
      man.command = "gen-market";
      auto cfg = load_config(gen_market->count("--seed") > 0);
      cmd_gen_market(cfg, seed, out_dir, man);
    } else if (*gen_choice) {
      man.command = "gen-choice-data";
      man.config_hash = sha256_hex("students=" + std::to_string(students) + "\nprograms=" + std::to_string(programs) +
                                   "\nalternatives=" + std::to_string(alternatives) + "\n");
      cmd_gen_choice_data(students, programs, alternatives, seed, out_dir, man);
    }
    man.seed = seed;
    write_manifest(out_dir, man, start);
    return 0;
  } catch (const CheckFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace matchlab
