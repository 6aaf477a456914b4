#include "matchlab/choice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "matchlab/csv.hpp"

namespace matchlab {

ChoiceMode parse_choice_mode(const std::string& s) {
  if (s == "acceptance") return ChoiceMode::Acceptance;
  if (s == "ranked") return ChoiceMode::Ranked;
  throw InputError("unknown choice mode '" + s + "'");
}

std::string to_string(ChoiceMode m) { return m == ChoiceMode::Acceptance ? "acceptance" : "ranked"; }

std::size_t LogitParams::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InputError("no coefficient named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

double LogitParams::theta(int program) const {
  if (program == reference_program) return 0.0;
  auto it = std::find(fe_programs.begin(), fe_programs.end(), program);
  if (it == fe_programs.end()) throw InputError("no fixed effect for program " + std::to_string(program));
  return beta(kNumBaseCovariates + (it - fe_programs.begin()));
}

LogitParams initial_params(const ChoiceDataset& data) {
  std::set<int> programs;
  for (const auto& r : data.rows)
    if (r.feasible) programs.insert(r.program);
  if (programs.empty()) throw InputError("dataset has no feasible rows");
  LogitParams p;
  p.names = {"early_offer", "first_early_offer", "distance_km", "distance_km_sq", "in_region"};
  p.reference_program = *programs.begin();
  for (int k : programs)
    if (k != p.reference_program) {
      p.fe_programs.push_back(k);
      p.names.push_back("theta_" + std::to_string(k));
    }
  p.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.names.size()));
  return p;
}

Eigen::VectorXd covariates(const ChoiceRow& row, const LogitParams& params) {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(params.beta.size());
  z(0) = row.early_offer;
  z(1) = row.first_early_offer;
  z(2) = row.distance_km;
  z(3) = row.distance_km * row.distance_km;
  z(4) = row.in_region;
  if (row.program != params.reference_program) {
    auto it = std::find(params.fe_programs.begin(), params.fe_programs.end(), row.program);
    if (it == params.fe_programs.end()) throw InputError("no fixed effect for program " + std::to_string(row.program));
    z(kNumBaseCovariates + (it - params.fe_programs.begin())) = 1.0;
  }
  return z;
}

double utility(const ChoiceRow& row, const LogitParams& params) { return covariates(row, params).dot(params.beta); }

namespace {

double log_sum_exp(const Eigen::VectorXd& u) {
  double m = u.maxCoeff();
  return m + std::log((u.array() - m).exp().sum());
}

struct ChoiceEvent {
  std::vector<Eigen::Index> alts;  // row indices into the design matrix
  Eigen::Index chosen = 0;
};

std::map<int, std::vector<std::size_t>> by_student(const ChoiceDataset& data) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t r = 0; r < data.rows.size(); ++r) out[data.rows[r].student].push_back(r);
  return out;
}

std::vector<ChoiceEvent> build_events(const ChoiceDataset& data, ChoiceMode mode) {
  std::vector<ChoiceEvent> events;
  if (mode == ChoiceMode::Ranked &&
      std::none_of(data.rows.begin(), data.rows.end(), [](const ChoiceRow& r) { return r.rank_position != 0; }))
    throw InputError("ranked mode needs rank_position values; dataset looks acceptance-shaped");
  for (const auto& [student, idx] : by_student(data)) {
    std::vector<Eigen::Index> feasible;
    for (auto r : idx) {
      const auto& row = data.rows[r];
      if (row.feasible) feasible.push_back(static_cast<Eigen::Index>(r));
      if (mode == ChoiceMode::Acceptance && row.chosen && !row.feasible)
        throw InputError("student " + std::to_string(student) + " chose an infeasible program");
      if (mode == ChoiceMode::Ranked && row.rank_position != 0 && !row.feasible)
        throw InputError("student " + std::to_string(student) + " ranks an infeasible program");
    }
    if (mode == ChoiceMode::Acceptance) {
      std::vector<Eigen::Index> chosen;
      for (auto r : feasible)
        if (data.rows[static_cast<std::size_t>(r)].chosen) chosen.push_back(r);
      if (chosen.size() != 1)
        throw InputError("student " + std::to_string(student) + " has " + std::to_string(chosen.size()) +
                         " chosen feasible programs");
      if (feasible.size() >= 2) events.push_back({feasible, chosen.front()});
      continue;
    }
    std::map<int, Eigen::Index> ranked;
    for (auto r : feasible) {
      int pos = data.rows[static_cast<std::size_t>(r)].rank_position;
      if (pos < 0) throw InputError("negative rank position for student " + std::to_string(student));
      if (pos == 0) continue;
      if (!ranked.emplace(pos, r).second)
        throw InputError("student " + std::to_string(student) + " repeats rank position " + std::to_string(pos));
    }
    if (ranked.empty()) {
      if (feasible.size() >= 2) throw InputError("student " + std::to_string(student) + " has no ranked program");
      continue;
    }
    if (ranked.rbegin()->first != static_cast<int>(ranked.size()))
      throw InputError("rank positions of student " + std::to_string(student) + " are not a prefix 1..r");
    std::vector<Eigen::Index> remaining = feasible;
    for (const auto& [pos, r] : ranked) {
      if (remaining.size() >= 2) events.push_back({remaining, r});
      remaining.erase(std::find(remaining.begin(), remaining.end(), r));
    }
  }
  if (events.empty()) throw InputError("no student has two or more feasible programs");
  return events;
}

Eigen::MatrixXd design_matrix(const ChoiceDataset& data, const LogitParams& params) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(data.rows.size()), params.beta.size());
  for (std::size_t r = 0; r < data.rows.size(); ++r)
    if (data.rows[r].feasible) X.row(static_cast<Eigen::Index>(r)) = covariates(data.rows[r], params).transpose();
  return X;
}

Eigen::VectorXd event_probs(const Eigen::MatrixXd& X, const ChoiceEvent& e, const Eigen::VectorXd& beta,
                            Eigen::VectorXd& u) {
  u.resize(static_cast<Eigen::Index>(e.alts.size()));
  for (std::size_t a = 0; a < e.alts.size(); ++a) u(static_cast<Eigen::Index>(a)) = X.row(e.alts[a]).dot(beta);
  double lse = log_sum_exp(u);
  return (u.array() - lse).exp();
}

LogLik loglik_core(const Eigen::MatrixXd& X, const std::vector<ChoiceEvent>& events, const Eigen::VectorXd& beta) {
  LogLik out{0.0, Eigen::VectorXd::Zero(beta.size())};
  Eigen::VectorXd u;
  for (const auto& e : events) {
    Eigen::VectorXd p = event_probs(X, e, beta, u);
    double lse = log_sum_exp(u);
    out.value += X.row(e.chosen).dot(beta) - lse;
    out.grad += X.row(e.chosen).transpose();
    for (std::size_t a = 0; a < e.alts.size(); ++a)
      out.grad -= p(static_cast<Eigen::Index>(a)) * X.row(e.alts[a]).transpose();
  }
  return out;
}

Eigen::MatrixXd information_core(const Eigen::MatrixXd& X, const std::vector<ChoiceEvent>& events,
                                 const Eigen::VectorXd& beta) {
  const Eigen::Index P = beta.size();
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(P, P);
  Eigen::VectorXd u;
  for (const auto& e : events) {
    Eigen::VectorXd p = event_probs(X, e, beta, u);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(P);
    for (std::size_t a = 0; a < e.alts.size(); ++a) mean += p(static_cast<Eigen::Index>(a)) * X.row(e.alts[a]).transpose();
    for (std::size_t a = 0; a < e.alts.size(); ++a) {
      Eigen::VectorXd d = X.row(e.alts[a]).transpose() - mean;
      info.noalias() += p(static_cast<Eigen::Index>(a)) * d * d.transpose();
    }
  }
  return info;
}

void check_size(const LogitParams& params) {
  if (params.names.size() != static_cast<std::size_t>(params.beta.size()) ||
      params.beta.size() != kNumBaseCovariates + static_cast<Eigen::Index>(params.fe_programs.size()))
    throw InputError("parameter vector does not match the covariate layout");
}

}  // namespace

std::vector<double> clogit_prob(const LogitParams& params, const std::vector<ChoiceRow>& rows) {
  std::vector<std::size_t> feasible;
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].feasible) feasible.push_back(r);
  if (feasible.empty()) throw InputError("student has no feasible program");
  Eigen::VectorXd u(static_cast<Eigen::Index>(feasible.size()));
  for (std::size_t a = 0; a < feasible.size(); ++a) u(static_cast<Eigen::Index>(a)) = utility(rows[feasible[a]], params);
  double lse = log_sum_exp(u);
  std::vector<double> out(rows.size(), 0.0);
  for (std::size_t a = 0; a < feasible.size(); ++a) out[feasible[a]] = std::exp(u(static_cast<Eigen::Index>(a)) - lse);
  return out;
}

LogLik loglik_grad(const LogitParams& params, const ChoiceDataset& data, ChoiceMode mode) {
  check_size(params);
  return loglik_core(design_matrix(data, params), build_events(data, mode), params.beta);
}

LogLik clogit_loglik_grad(const LogitParams& params, const ChoiceDataset& data) {
  return loglik_grad(params, data, ChoiceMode::Acceptance);
}

LogLik rologit_loglik_grad(const LogitParams& params, const ChoiceDataset& data) {
  return loglik_grad(params, data, ChoiceMode::Ranked);
}

Eigen::MatrixXd information_matrix(const LogitParams& params, const ChoiceDataset& data, ChoiceMode mode) {
  check_size(params);
  return information_core(design_matrix(data, params), build_events(data, mode), params.beta);
}

namespace {

Eigen::VectorXd column_scales(const Eigen::MatrixXd& X, const std::vector<ChoiceEvent>& events) {
  std::vector<Eigen::Index> used;
  for (const auto& e : events) used.insert(used.end(), e.alts.begin(), e.alts.end());
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  Eigen::VectorXd scale = Eigen::VectorXd::Ones(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    double mean = 0.0, m2 = 0.0;
    for (std::size_t n = 0; n < used.size(); ++n) {
      double x = X(used[n], c), d = x - mean;
      mean += d / static_cast<double>(n + 1);
      m2 += d * (x - mean);
    }
    double sd = used.size() > 1 ? std::sqrt(m2 / static_cast<double>(used.size() - 1)) : 0.0;
    if (sd > 0.0) scale(c) = sd;
  }
  return scale;
}

void identifiable_core(const Eigen::MatrixXd& Xs, const std::vector<ChoiceEvent>& events, const LogitParams& params) {
  Eigen::Index n = 0;
  for (const auto& e : events) n += static_cast<Eigen::Index>(e.alts.size()) - 1;
  Eigen::MatrixXd D(n, Xs.cols());
  Eigen::Index r = 0;
  for (const auto& e : events)
    for (auto a : e.alts)
      if (a != e.chosen) D.row(r++) = Xs.row(a) - Xs.row(e.chosen);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  qr.setThreshold(1e-10);
  if (qr.rank() == D.cols()) return;
  std::string msg = "non-identifiable design";
  std::string zero;
  for (Eigen::Index c = 0; c < D.cols(); ++c)
    if (D.col(c).cwiseAbs().maxCoeff() == 0.0) zero += (zero.empty() ? "" : ", ") + params.names[static_cast<std::size_t>(c)];
  msg += zero.empty() ? ": collinear covariates" : ": no within-choice-set variation in " + zero;
  throw InputError(msg);
}

}  // namespace

void check_identifiable(const LogitParams& params, const ChoiceDataset& data, ChoiceMode mode) {
  check_size(params);
  Eigen::MatrixXd X = design_matrix(data, params);
  auto events = build_events(data, mode);
  Eigen::VectorXd s = column_scales(X, events);
  identifiable_core(X * s.cwiseInverse().asDiagonal(), events, params);
}

FitResult fit_mle(const ChoiceDataset& data, ChoiceMode mode, const LogitParams& init, const FitOptions& opts) {
  check_size(init);
  const Eigen::MatrixXd X = design_matrix(data, init);
  const auto events = build_events(data, mode);
  const Eigen::VectorXd scale = column_scales(X, events);
  const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  identifiable_core(Xs, events, init);

  const double n = static_cast<double>(events.size());
  const Eigen::Index P = init.beta.size();
  // minimize the mean negative log-likelihood over standardized coefficients
  auto eval = [&](const Eigen::VectorXd& b, Eigen::VectorXd& g) {
    LogLik ll = loglik_core(Xs, events, b);
    g = -ll.grad / n;
    return -ll.value / n;
  };

  Eigen::VectorXd b = init.beta.cwiseProduct(scale), g;
  double f = eval(b, g);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(P, P);
  {
    Eigen::MatrixXd info = information_core(Xs, events, b) / n;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) H = llt.solve(Eigen::MatrixXd::Identity(P, P));
  }

  FitReport rep;
  rep.events = static_cast<int>(events.size());
  while (true) {
    rep.grad_norm = g.cwiseAbs().maxCoeff();
    if (rep.grad_norm < opts.grad_tol) {
      rep.converged = true;
      break;
    }
    if (rep.iterations >= opts.max_iterations) break;
    Eigen::VectorXd d = -H * g;
    if (g.dot(d) >= 0.0) {
      H = Eigen::MatrixXd::Identity(P, P);
      d = -g;
    }
    double t = 1.0, f_new = f;
    Eigen::VectorXd b_new, g_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      b_new = b + t * d;
      f_new = eval(b_new, g_new);
      if (!std::isfinite(f_new)) continue;
      // near the optimum f stops resolving decreases, so fall back on the gradient
      bool armijo = f_new <= f + 1e-4 * t * g.dot(d);
      bool flat = f_new <= f + 8 * std::numeric_limits<double>::epsilon() * std::abs(f) &&
                  g_new.cwiseAbs().maxCoeff() < rep.grad_norm;
      if (armijo || flat) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    ++rep.iterations;
    Eigen::VectorXd s = b_new - b, y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-300) {
      double rho = 1.0 / sy;
      Eigen::MatrixXd V = Eigen::MatrixXd::Identity(P, P) - rho * y * s.transpose();
      H = V.transpose() * H * V + rho * s * s.transpose();
    }
    b = b_new;
    g = g_new;
    f = f_new;
  }

  FitResult out;
  out.params = init;
  out.params.beta = b.cwiseQuotient(scale);
  rep.loglik = -f * n;
  Eigen::MatrixXd info = information_core(X, events, out.params.beta);
  out.covariance = info.ldlt().solve(Eigen::MatrixXd::Identity(P, P));
  out.std_err = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.report = rep;
  return out;
}

MarginalEffects marginal_effect_early_offer(const LogitParams& params, const ChoiceDataset& data) {
  check_size(params);
  const double de = params.beta(0), df = params.beta(1);
  MarginalEffects out;
  double base = 0.0, early = 0.0, first = 0.0;
  for (const auto& [student, idx] : by_student(data)) {
    std::vector<const ChoiceRow*> feasible;
    for (auto r : idx)
      if (data.rows[r].feasible) feasible.push_back(&data.rows[r]);
    if (feasible.size() < 2) continue;
    Eigen::VectorXd u(static_cast<Eigen::Index>(feasible.size()));
    for (std::size_t a = 0; a < feasible.size(); ++a) u(static_cast<Eigen::Index>(a)) = utility(*feasible[a], params);
    for (std::size_t a = 0; a < feasible.size(); ++a) {
      const auto ia = static_cast<Eigen::Index>(a);
      const double off = u(ia) - de * feasible[a]->early_offer - df * feasible[a]->first_early_offer;
      auto prob = [&](double ua) {
        Eigen::VectorXd v = u;
        v(ia) = ua;
        return std::exp(ua - log_sum_exp(v));
      };
      double p0 = prob(off);
      base += p0;
      early += prob(off + de) - p0;
      first += prob(off + de + df) - p0;
      ++out.rows;
    }
  }
  if (out.rows == 0) throw InputError("no student has two or more feasible programs");
  out.baseline = base / out.rows;
  out.early = early / out.rows;
  out.first_early = first / out.rows;
  return out;
}

double distance_equivalent(double gamma_d, double gamma_d2, double delta_utility, double at_distance) {
  if (at_distance < 0.0) throw InputError("distance must be non-negative");
  const double slope = gamma_d + 2 * gamma_d2 * at_distance;
  if (!(slope < 0.0)) throw InputError("utility is not decreasing in distance at the evaluation point");
  if (delta_utility == 0.0) return 0.0;
  // gamma_d2 D^2 - slope D - delta = 0
  const double a = gamma_d2, b = -slope, c = -delta_utility;
  std::vector<double> roots;
  if (std::abs(a) < 1e-300) {
    roots.push_back(-c / b);
  } else {
    double disc = b * b - 4 * a * c;
    if (disc < 0.0) throw InputError("utility gain has no distance equivalent");
    double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
    roots.push_back(q / a);
    if (q != 0.0) roots.push_back(c / q);
  }
  const double tol = 1e-12 * std::max(1.0, at_distance);
  double best = std::numeric_limits<double>::infinity();
  for (double r : roots)
    if (r >= -tol && r <= at_distance + tol && std::abs(r) < std::abs(best)) best = std::clamp(r, 0.0, at_distance);
  if (!std::isfinite(best)) throw InputError("utility gain exceeds the value of the whole distance");
  return best;
}

double distance_equivalent(const LogitParams& params, double delta_utility, double at_distance) {
  return distance_equivalent(params.coef("distance_km"), params.coef("distance_km_sq"), delta_utility, at_distance);
}

LogitParams synthetic_truth(int n_programs) {
  ChoiceDataset stub;
  for (int k = 1; k <= n_programs; ++k) stub.rows.push_back({0, k});
  LogitParams p = initial_params(stub);
  p.coef("early_offer") = 0.8;
  p.coef("first_early_offer") = 0.5;
  p.coef("distance_km") = -0.008;
  p.coef("distance_km_sq") = 6e-6;
  p.coef("in_region") = 0.4;
  for (std::size_t j = 0; j < p.fe_programs.size(); ++j)
    p.beta(kNumBaseCovariates + static_cast<Eigen::Index>(j)) = 0.3 * std::sin(1.7 * static_cast<double>(j + 1));
  return p;
}

ChoiceDataset synthetic_choice_data(const SyntheticChoiceConfig& cfg, const LogitParams& truth, RngStream stream) {
  if (cfg.n_students < 1 || cfg.alternatives < 1 || cfg.alternatives > cfg.n_programs)
    throw InputError("synthetic choice config needs 1 <= alternatives <= n_programs and students >= 1");
  ChoiceDataset data;
  std::vector<int> programs(static_cast<std::size_t>(cfg.n_programs));
  for (int k = 0; k < cfg.n_programs; ++k) programs[static_cast<std::size_t>(k)] = k + 1;
  for (int i = 1; i <= cfg.n_students; ++i) {
    RngStream rng = stream.fork(static_cast<std::uint64_t>(i));
    std::vector<int> pool = programs;
    rng.shuffle(pool);
    const std::size_t A = static_cast<std::size_t>(cfg.alternatives);
    std::vector<ChoiceRow> rows;
    std::vector<std::size_t> early;
    for (std::size_t a = 0; a < std::min(pool.size(), A + 1); ++a) {
      ChoiceRow r;
      r.student = i;
      r.program = pool[a];
      r.feasible = a < A;
      r.distance_km = cfg.min_distance_km + (cfg.max_distance_km - cfg.min_distance_km) * rng.uniform();
      r.in_region = rng.uniform() < cfg.region_rate ? 1 : 0;
      r.early_offer = r.feasible && rng.uniform() < cfg.early_offer_rate ? 1 : 0;
      if (r.early_offer) early.push_back(a);
      rows.push_back(r);
    }
    if (!early.empty()) rows[early[rng.below(early.size())]].first_early_offer = 1;
    std::vector<std::pair<double, std::size_t>> u;
    for (std::size_t a = 0; a < A; ++a) u.push_back({utility(rows[a], truth) + gumbel_draw(rng), a});
    std::sort(u.begin(), u.end(), std::greater<>());
    rows[u.front().second].chosen = 1;
    for (std::size_t pos = 0; pos < u.size(); ++pos) {
      auto& r = rows[u[pos].second];
      r.rank_position = static_cast<int>(pos + 1);
      if (r.early_offer) break;
    }
    data.rows.insert(data.rows.end(), rows.begin(), rows.end());
  }
  return data;
}

namespace {
const std::vector<std::string> kChoiceHeader{"student_id", "program_id", "feasible",  "early_offer",  "first_early_offer",
                                             "distance_km", "in_region", "chosen", "rank_position"};
}

ChoiceDataset read_choice_csv(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  std::vector<std::size_t> col;
  for (const auto& name : kChoiceHeader) col.push_back(t.column(name));
  auto flag = [](const std::string& s, const char* what) {
    long long v = parse_int(s);
    if (v != 0 && v != 1) throw InputError(std::string(what) + " must be 0 or 1");
    return static_cast<int>(v);
  };
  ChoiceDataset data;
  for (const auto& row : t.rows) {
    ChoiceRow r;
    r.student = static_cast<int>(parse_int(row[col[0]]));
    r.program = static_cast<int>(parse_int(row[col[1]]));
    r.feasible = flag(row[col[2]], "feasible") == 1;
    r.early_offer = flag(row[col[3]], "early_offer");
    r.first_early_offer = flag(row[col[4]], "first_early_offer");
    r.distance_km = parse_double(row[col[5]]);
    r.in_region = flag(row[col[6]], "in_region");
    r.chosen = flag(row[col[7]], "chosen");
    r.rank_position = static_cast<int>(parse_int(row[col[8]]));
    if (r.first_early_offer && !r.early_offer) throw InputError("first_early_offer set without early_offer");
    if (r.distance_km < 0.0) throw InputError("negative distance_km");
    data.rows.push_back(r);
  }
  return data;
}

void write_choice_csv(const std::filesystem::path& path, const ChoiceDataset& data) {
  CsvTable t{kChoiceHeader, {}};
  for (const auto& r : data.rows)
    t.rows.push_back({std::to_string(r.student), std::to_string(r.program), r.feasible ? "1" : "0",
                      std::to_string(r.early_offer), std::to_string(r.first_early_offer), format_double(r.distance_km),
                      std::to_string(r.in_region), std::to_string(r.chosen), std::to_string(r.rank_position)});
  write_csv(path, t);
}

void write_fit_csv(const std::filesystem::path& path, const FitResult& fit) {
  CsvTable t{{"name", "estimate", "std_err"}, {}};
  for (std::size_t j = 0; j < fit.params.names.size(); ++j) {
    auto i = static_cast<Eigen::Index>(j);
    t.rows.push_back({fit.params.names[j], format_double(fit.params.beta(i)), format_double(fit.std_err(i))});
  }
  write_csv(path, t);
}

}  // namespace matchlab
