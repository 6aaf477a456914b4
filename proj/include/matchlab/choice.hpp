#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "matchlab/market.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

/// One (student, program) alternative.
struct ChoiceRow {
  int student = 0;
  int program = 0;
  bool feasible = true;
  int early_offer = 0;
  int first_early_offer = 0;
  double distance_km = 0.0;
  int in_region = 0;
  int chosen = 0;         // acceptance mode
  int rank_position = 0;  // ranked mode: 1.. for the observed prefix, 0 = unranked
};

struct ChoiceDataset {
  std::vector<ChoiceRow> rows;
};

enum class ChoiceMode { Acceptance, Ranked };
ChoiceMode parse_choice_mode(const std::string& s);
std::string to_string(ChoiceMode m);

/// Coefficients on early_offer, first_early_offer, distance_km, distance_km_sq,
/// in_region, then one fixed effect per non-reference program.
struct LogitParams {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  int reference_program = 0;
  std::vector<int> fe_programs;  // program id of each fixed effect, in order

  std::size_t index(const std::string& name) const;
  double coef(const std::string& name) const { return beta(static_cast<Eigen::Index>(index(name))); }
  double& coef(const std::string& name) { return beta(static_cast<Eigen::Index>(index(name))); }
  /// Fixed effect of a program; 0 for the reference.
  double theta(int program) const;
};

inline constexpr int kNumBaseCovariates = 5;

/// Zero coefficients with fixed effects for every program on a feasible row;
/// the lowest program id is the reference.
LogitParams initial_params(const ChoiceDataset& data);
Eigen::VectorXd covariates(const ChoiceRow& row, const LogitParams& params);
double utility(const ChoiceRow& row, const LogitParams& params);

/// Choice probabilities over one student's rows, aligned with `rows`;
/// infeasible rows get 0. Throws InputError if none is feasible.
std::vector<double> clogit_prob(const LogitParams& params, const std::vector<ChoiceRow>& rows);

struct LogLik {
  double value = 0.0;
  Eigen::VectorXd grad;
};

LogLik clogit_loglik_grad(const LogitParams& params, const ChoiceDataset& data);
LogLik rologit_loglik_grad(const LogitParams& params, const ChoiceDataset& data);
LogLik loglik_grad(const LogitParams& params, const ChoiceDataset& data, ChoiceMode mode);
/// Observed information (negative Hessian of the log-likelihood).
Eigen::MatrixXd information_matrix(const LogitParams& params, const ChoiceDataset& data, ChoiceMode mode);

/// Throws InputError naming the unidentified coefficients when the
/// within-choice-set differences of the covariates are rank deficient.
void check_identifiable(const LogitParams& params, const ChoiceDataset& data, ChoiceMode mode);

struct FitReport {
  int iterations = 0;
  double grad_norm = 0.0;  // max-norm of the per-event gradient in standardized coordinates
  double loglik = 0.0;
  bool converged = false;
  int events = 0;
};

struct FitResult {
  LogitParams params;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd std_err;
  FitReport report;
};

struct FitOptions {
  double grad_tol = 1e-8;
  int max_iterations = 500;
};

FitResult fit_mle(const ChoiceDataset& data, ChoiceMode mode, const LogitParams& init, const FitOptions& opts = {});

struct MarginalEffects {
  double baseline = 0.0;     // mean predicted acceptance with both flags off
  double early = 0.0;        // early_offer=1, first=0 minus baseline
  double first_early = 0.0;  // early_offer=1, first=1 minus baseline
  int rows = 0;
};

/// Averages over feasible rows of students with at least two feasible rows,
/// toggling the flags of that row only.
MarginalEffects marginal_effect_early_offer(const LogitParams& params, const ChoiceDataset& data);

/// Distance reduction (km) from `at_distance` worth `delta_utility`.
double distance_equivalent(const LogitParams& params, double delta_utility, double at_distance);
double distance_equivalent(double gamma_d, double gamma_d2, double delta_utility, double at_distance);

struct SyntheticChoiceConfig {
  int n_students = 5000;
  int n_programs = 8;
  int alternatives = 4;  // feasible programs per student
  double early_offer_rate = 0.4;
  double min_distance_km = 5.0;
  double max_distance_km = 400.0;
  double region_rate = 0.5;
};

/// Generating parameters used by the synthetic data tests.
LogitParams synthetic_truth(int n_programs);

/// Students choose by Z*beta + Gumbel. `chosen` marks the top choice; ranks
/// cover the utility order down to and including the best early offer.
ChoiceDataset synthetic_choice_data(const SyntheticChoiceConfig& cfg, const LogitParams& truth, RngStream stream);

ChoiceDataset read_choice_csv(const std::filesystem::path& path);
void write_choice_csv(const std::filesystem::path& path, const ChoiceDataset& data);
void write_fit_csv(const std::filesystem::path& path, const FitResult& fit);

}  // namespace matchlab
