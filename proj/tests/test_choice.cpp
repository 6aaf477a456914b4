#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "matchlab/choice.hpp"
#include "matchlab/rng.hpp"
#include "oracles.hpp"

using namespace matchlab;

namespace {

ChoiceRow row(int student, int program, double dist, int chosen = 0, int rank = 0, int early = 0, int first = 0) {
  ChoiceRow r;
  r.student = student;
  r.program = program;
  r.distance_km = dist;
  r.chosen = chosen;
  r.rank_position = rank;
  r.early_offer = early;
  r.first_early_offer = first;
  return r;
}

ChoiceDataset synthetic(int students, std::uint64_t seed, int alternatives = 4) {
  SyntheticChoiceConfig cfg;
  cfg.n_students = students;
  cfg.alternatives = alternatives;
  return synthetic_choice_data(cfg, synthetic_truth(cfg.n_programs), RngStream(seed));
}

// Step h in standardized coordinates: covariates are of order |z_max|.
Eigen::VectorXd covariate_scale(const LogitParams& p, const ChoiceDataset& data) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(p.beta.size());
  for (const auto& r : data.rows) s = s.cwiseMax(covariates(r, p).cwiseAbs());
  return s;
}

double max_fd_error(const LogitParams& at, const ChoiceDataset& data, ChoiceMode mode) {
  const auto g = loglik_grad(at, data, mode).grad;
  const auto scale = covariate_scale(at, data);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < at.beta.size(); ++j) {
    const double h = 1e-5 / scale(j);
    LogitParams up = at, dn = at;
    up.beta(j) += h;
    dn.beta(j) -= h;
    const double fd = (loglik_grad(up, data, mode).value - loglik_grad(dn, data, mode).value) / (2 * h);
    // relative in the standardized coordinate
    worst = std::max(worst, std::abs(fd - g(j)) * scale(j) / std::max(1.0, std::abs(g(j)) * scale(j)));
  }
  return worst;
}

}  // namespace

TEST_SUITE("choice_models") {
  TEST_CASE("conditional logit probabilities") {
    ChoiceDataset d{{row(1, 1, 0), row(1, 2, 0)}};
    auto p = initial_params(d);
    auto pr = clogit_prob(p, d.rows);
    CHECK(pr[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(pr[1] == doctest::Approx(0.5).epsilon(1e-15));

    // fixed effect of program 2 is ln 2
    p.beta(p.index("theta_2")) = std::log(2.0);
    pr = clogit_prob(p, d.rows);
    CHECK(pr[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(pr[1] == doctest::Approx(2.0 / 3).epsilon(1e-15));

    ChoiceDataset one{{row(1, 1, 10), row(1, 2, 10)}};
    one.rows[1].feasible = false;
    pr = clogit_prob(initial_params(ChoiceDataset{{row(1, 1, 0), row(1, 2, 0)}}), one.rows);
    CHECK(pr[0] == 1.0);
    CHECK(pr[1] == 0.0);

    one.rows[0].feasible = false;
    CHECK_THROWS_AS(clogit_prob(p, one.rows), InputError);
  }

  TEST_CASE("log-sum-exp survives huge utilities") {
    ChoiceDataset d{{row(1, 1, 0, 1), row(1, 2, 0)}};
    auto p = initial_params(d);
    p.beta(p.index("theta_2")) = 1000.0;
    auto pr = clogit_prob(p, d.rows);
    CHECK(std::isfinite(pr[0]));
    CHECK(pr[1] == 1.0);
    CHECK(clogit_loglik_grad(p, d).value == doctest::Approx(-1000.0));
  }

  TEST_CASE("probabilities sum to one and ignore a per-student shift") {
    auto data = synthetic(50, 11);
    auto p = synthetic_truth(8);
    std::map<int, std::vector<ChoiceRow>> by;
    for (const auto& r : data.rows) by[r.student].push_back(r);
    for (auto [i, rows] : by) {
      auto pr = clogit_prob(p, rows);
      double s = 0;
      for (double x : pr) s += x;
      CHECK(std::abs(s - 1) <= 1e-12);
      // in_region = 1 everywhere adds the same constant to every utility
      auto a = rows, b = rows;
      for (auto& r : a) r.in_region = 0;
      for (auto& r : b) r.in_region = 1;
      auto pa = clogit_prob(p, a), pb = clogit_prob(p, b);
      for (std::size_t j = 0; j < pa.size(); ++j) CHECK(std::abs(pa[j] - pb[j]) <= 1e-12);
    }
  }

  TEST_CASE("zero coefficients give -ln m per student") {
    ChoiceDataset d{{row(1, 1, 5, 1), row(1, 2, 6), row(1, 3, 7), row(2, 1, 5), row(2, 2, 6, 1)}};
    auto p = initial_params(d);
    CHECK(clogit_loglik_grad(p, d).value == doctest::Approx(-std::log(3.0) - std::log(2.0)).epsilon(1e-14));
  }

  TEST_CASE("rank-ordered events at zero coefficients") {
    // full strict ranking of 3
    ChoiceDataset full{{row(1, 1, 5, 1, 2), row(1, 2, 6, 0, 1), row(1, 3, 7, 0, 3)}};
    CHECK(rologit_loglik_grad(initial_params(full), full).value == doctest::Approx(-std::log(6.0)).epsilon(1e-14));
    // accepter: one top-choice event over 4 feasible programs
    ChoiceDataset acc{{row(1, 1, 5, 0, 0), row(1, 2, 6, 1, 1), row(1, 3, 7, 0, 0), row(1, 4, 8, 0, 0)}};
    CHECK(rologit_loglik_grad(initial_params(acc), acc).value == doctest::Approx(-std::log(4.0)).epsilon(1e-14));
  }

  TEST_CASE("exploded logit equals the product of successive top-choice events") {
    RngStream rng(5);
    auto p = synthetic_truth(8);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<ChoiceRow> rows;
      std::vector<int> programs{1, 2, 3, 4, 5, 6, 7, 8};
      rng.shuffle(programs);
      const int m = 2 + static_cast<int>(rng.below(4));
      for (int j = 0; j < m; ++j) {
        auto r = row(1, programs[static_cast<std::size_t>(j)], 5 + 300 * rng.uniform());
        r.in_region = rng.uniform() < 0.5;
        r.early_offer = rng.uniform() < 0.4;
        r.rank_position = j + 1;
        rows.push_back(r);
      }
      rows.front().chosen = 1;
      double expect = 0.0;
      std::vector<ChoiceRow> rest = rows;
      while (!rest.empty()) {
        expect += std::log(clogit_prob(p, rest).front());
        rest.erase(rest.begin());
      }
      CHECK(rologit_loglik_grad(p, ChoiceDataset{rows}).value == doctest::Approx(expect).epsilon(1e-13));
    }
  }

  TEST_CASE("malformed rank prefixes are rejected") {
    ChoiceDataset gap{{row(1, 1, 5, 1, 1), row(1, 2, 6, 0, 3), row(1, 3, 7)}};
    CHECK_THROWS_AS(rologit_loglik_grad(initial_params(gap), gap), InputError);
    ChoiceDataset dup{{row(1, 1, 5, 1, 1), row(1, 2, 6, 0, 1), row(1, 3, 7)}};
    CHECK_THROWS_AS(rologit_loglik_grad(initial_params(dup), dup), InputError);
    ChoiceDataset acceptance_shaped{{row(1, 1, 5, 1), row(1, 2, 6)}};
    CHECK_THROWS_AS(rologit_loglik_grad(initial_params(acceptance_shaped), acceptance_shaped), InputError);
  }

  TEST_CASE("duplicating every student doubles the log-likelihood") {
    auto data = synthetic(50, 12);
    auto p = synthetic_truth(8);
    ChoiceDataset twice = data;
    for (auto r : data.rows) {
      r.student += 100000;
      twice.rows.push_back(r);
    }
    for (auto mode : {ChoiceMode::Acceptance, ChoiceMode::Ranked}) {
      auto a = loglik_grad(p, data, mode), b = loglik_grad(p, twice, mode);
      CHECK(b.value == doctest::Approx(2 * a.value).epsilon(1e-13));
      CHECK((b.grad - 2 * a.grad).cwiseAbs().maxCoeff() <= 1e-9 * (1 + a.grad.cwiseAbs().maxCoeff()));
    }
  }

  TEST_CASE("row order does not matter") {
    auto data = synthetic(50, 13);
    auto p = synthetic_truth(8);
    auto shuffled = data;
    RngStream rng(99);
    rng.shuffle(shuffled.rows);
    for (auto mode : {ChoiceMode::Acceptance, ChoiceMode::Ranked}) {
      auto a = loglik_grad(p, data, mode), b = loglik_grad(p, shuffled, mode);
      CHECK(std::abs(a.value - b.value) <= 1e-12 * std::abs(a.value));
      CHECK((a.grad - b.grad).cwiseAbs().maxCoeff() <= 1e-12 * (1 + a.grad.cwiseAbs().maxCoeff()));
    }
  }

  TEST_CASE("analytic gradients match central differences") {
    auto data = synthetic(50, 14);
    RngStream rng(3);
    for (int rep = 0; rep < 3; ++rep) {
      auto p = synthetic_truth(8);
      const auto scale = covariate_scale(p, data);
      for (Eigen::Index j = 0; j < p.beta.size(); ++j) p.beta(j) += 0.3 * rng.normal() / scale(j);
      CHECK(max_fd_error(p, data, ChoiceMode::Acceptance) <= 1e-6);
      CHECK(max_fd_error(p, data, ChoiceMode::Ranked) <= 1e-6);
    }
  }

  TEST_CASE("log-likelihood is concave along random lines") {
    auto data = synthetic(200, 15);
    RngStream rng(4);
    auto p0 = synthetic_truth(8);
    const auto scale = covariate_scale(p0, data);
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd dir(p0.beta.size());
      for (Eigen::Index j = 0; j < dir.size(); ++j) dir(j) = rng.normal() / scale(j);
      for (auto mode : {ChoiceMode::Acceptance, ChoiceMode::Ranked}) {
        auto at = [&](double t) {
          LogitParams p = p0;
          p.beta += t * dir;
          return loglik_grad(p, data, mode).value;
        };
        for (double t : {-1.0, -0.3, 0.0, 0.4, 1.2}) {
          const double h = 0.05;
          CHECK(at(t + h) - 2 * at(t) + at(t - h) <= 1e-9 * std::abs(at(t)));
        }
      }
    }
  }

  TEST_CASE("information matrix is the negative Hessian") {
    auto data = synthetic(100, 16);
    auto p = synthetic_truth(8);
    const auto scale = covariate_scale(p, data);
    for (auto mode : {ChoiceMode::Acceptance, ChoiceMode::Ranked}) {
      auto info = information_matrix(p, data, mode);
      for (Eigen::Index j = 0; j < p.beta.size(); ++j) {
        const double h = 1e-5 / scale(j);
        LogitParams up = p, dn = p;
        up.beta(j) += h;
        dn.beta(j) -= h;
        Eigen::VectorXd col = -(loglik_grad(up, data, mode).grad - loglik_grad(dn, data, mode).grad) / (2 * h);
        for (Eigen::Index i = 0; i < col.size(); ++i)
          CHECK(std::abs(col(i) - info(i, j)) * scale(i) * scale(j) <=
                1e-5 * std::max(1.0, std::abs(info(i, j)) * scale(i) * scale(j)));
      }
    }
  }

  TEST_CASE("maximum likelihood recovers the generating parameters") {
    auto data = synthetic(5000, 3);
    auto truth = synthetic_truth(8);
    for (auto mode : {ChoiceMode::Acceptance, ChoiceMode::Ranked}) {
      CAPTURE(to_string(mode));
      auto fit = fit_mle(data, mode, initial_params(data));
      REQUIRE(fit.report.converged);
      CHECK(fit.report.grad_norm < 1e-8);
      for (Eigen::Index j = 0; j < truth.beta.size(); ++j) {
        CAPTURE(fit.params.names[static_cast<std::size_t>(j)]);
        CHECK(std::abs(fit.params.beta(j) - truth.beta(j)) <= 3 * fit.std_err(j));
      }
      auto again = fit_mle(data, mode, fit.params);
      CHECK(again.report.iterations <= 1);
      CHECK((again.params.beta - fit.params.beta).cwiseAbs().maxCoeff() <=
            1e-6 * fit.std_err.cwiseAbs().minCoeff());
    }
  }

  TEST_CASE("a covariate constant within choice sets is not identified") {
    auto data = synthetic(300, 17);
    std::map<int, int> region;
    for (auto& r : data.rows) r.in_region = region.emplace(r.student, r.student % 2).first->second;
    CHECK_THROWS_WITH_AS(fit_mle(data, ChoiceMode::Acceptance, initial_params(data)),
                         doctest::Contains("in_region"), InputError);
  }

  TEST_CASE("students with one feasible program carry no information") {
    ChoiceDataset d{{row(1, 1, 5, 1), row(2, 2, 6, 1)}};
    CHECK_THROWS_AS(fit_mle(d, ChoiceMode::Acceptance, initial_params(d)), InputError);
  }

  TEST_CASE("marginal effects match the brute-force oracle") {
    auto data = synthetic(400, 18);
    RngStream rng(6);
    for (int rep = 0; rep < 5; ++rep) {
      auto p = synthetic_truth(8);
      for (Eigen::Index j = 0; j < p.beta.size(); ++j) p.beta(j) += 0.2 * rng.normal() / (j == 2 ? 100 : j == 3 ? 1e4 : 1);
      auto me = marginal_effect_early_offer(p, data);
      auto bf = oracle::marginal_effects_bruteforce(p, data);
      CHECK(me.rows == bf.rows);
      CHECK(std::abs(me.baseline - bf.baseline) <= 1e-12);
      CHECK(std::abs(me.early - bf.early) <= 1e-12);
      CHECK(std::abs(me.first_early - bf.first_early) <= 1e-12);
    }
    auto p = synthetic_truth(8);
    p.coef("early_offer") = 0;
    p.coef("first_early_offer") = 0;
    auto me = marginal_effect_early_offer(p, data);
    CHECK(me.early == 0.0);
    CHECK(me.first_early == 0.0);
  }

  TEST_CASE("marginal effects on a hand-computed market") {
    // two programs, equal fixed effects and distances: baseline 1/2,
    // toggled row gets e^d/(e^d + 1)
    ChoiceDataset d{{row(1, 1, 10, 1), row(1, 2, 10)}};
    auto p = initial_params(d);
    p.coef("early_offer") = 0.6;
    p.coef("first_early_offer") = 0.3;
    auto me = marginal_effect_early_offer(p, d);
    CHECK(me.baseline == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(me.early == doctest::Approx(std::exp(0.6) / (std::exp(0.6) + 1) - 0.5).epsilon(1e-14));
    CHECK(me.first_early == doctest::Approx(std::exp(0.9) / (std::exp(0.9) + 1) - 0.5).epsilon(1e-14));
  }

  TEST_CASE("distance equivalents") {
    CHECK(distance_equivalent(-0.01, 0.0, 0.61, 200.0) == doctest::Approx(61.0).epsilon(1e-12));
    CHECK(distance_equivalent(-0.01, 0.0, 0.0, 200.0) == 0.0);
    RngStream rng(8);
    for (int rep = 0; rep < 50; ++rep) {
      const double gd = -0.005 - 0.01 * rng.uniform(), gd2 = 1e-5 * rng.uniform();
      const double d = 50 + 300 * rng.uniform();
      if (gd + 2 * gd2 * d >= 0) continue;
      const double whole = -(gd * d + gd2 * d * d);
      const double du = whole * 0.9 * rng.uniform();
      const double bis = oracle::distance_equivalent_bisection(gd, gd2, du, d);
      CHECK(std::abs(distance_equivalent(gd, gd2, du, d) - bis) <= 1e-9);
    }
    CHECK_THROWS_AS(distance_equivalent(-0.01, 0.0, 5.0, 100.0), InputError);
    CHECK_THROWS_AS(distance_equivalent(0.01, 0.0, 0.1, 100.0), InputError);

    auto p = synthetic_truth(8);
    const double du = p.coef("early_offer");
    CHECK(distance_equivalent(p, du, 150.0) ==
          distance_equivalent(p.coef("distance_km"), p.coef("distance_km_sq"), du, 150.0));
  }

  TEST_CASE("choice csv round trip") {
    auto data = synthetic(40, 19);
    auto path = std::filesystem::temp_directory_path() / "matchlab_choice_rt.csv";
    write_choice_csv(path, data);
    auto back = read_choice_csv(path);
    REQUIRE(back.rows.size() == data.rows.size());
    for (std::size_t j = 0; j < data.rows.size(); ++j) {
      const auto &a = data.rows[j], &b = back.rows[j];
      CHECK(a.student == b.student);
      CHECK(a.program == b.program);
      CHECK(a.feasible == b.feasible);
      CHECK(a.early_offer == b.early_offer);
      CHECK(a.first_early_offer == b.first_early_offer);
      CHECK(a.distance_km == b.distance_km);
      CHECK(a.in_region == b.in_region);
      CHECK(a.chosen == b.chosen);
      CHECK(a.rank_position == b.rank_position);
    }
    std::filesystem::remove(path);
  }
}
