#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "dynamo/operators.hpp"

namespace dynamo {

/// Reference values of alpha = J0(pi/2) and beta = 2 pi J1(pi/2).
inline constexpr double kAlphaFixture = 0.47200121576823483;
inline constexpr double kBetaFixture = 3.5614607871688419;

AnalyticMatrixSet fixture_matrices();

struct Check {
  std::string name;
  double measured = 0.0;
  double allowed = 0.0;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// passed = measured < allowed
Check bound_check(std::string name, double measured, double allowed, std::string detail = {});

struct CheckSuite {
  std::string name;
  std::vector<Check> checks;

  bool ok() const;
  void add(Check c) { checks.push_back(std::move(c)); }
  nlohmann::json to_json() const;
  void write_junit(std::ostream& os) const;
};

std::string to_string(const Check& c);

Check check_bessel(const AnalyticMatrixSet& fixtures);

/// Numeric matrix element of family 'U', 'V' or 'W' at kappa = 0 against the closed form.
double matrix_error(char family, double lambda, const AnalyticMatrixSet& fixtures, const SolverParams& params);
Check check_matrix(char family, double lambda, const AnalyticMatrixSet& fixtures, const SolverParams& params,
                   double tol);

/// Eigen data of the analytic W_R matrix: closed forms, top eigenvalue > e, gaps > 0.1.
std::vector<Check> check_eigen(const AnalyticMatrixSet& fixtures, double R, double tol);

/// Translation identity for `count` random (y, k, j) tuples.
Check check_translation(double kappa, int count, std::uint64_t seed, const SolverParams& params, double tol);

/// Grid average of the translated W_1 action on e_z (with random extra probe mass) against the diagonal element.
Check check_averaging(double kappa, int M, std::uint64_t seed, const SolverParams& params, double tol);

/// Off-target elements of V_1 (row e_z) and U_1 (column e_z) for |k|_inf <= 2.
Check check_selection(const SolverParams& params, double tol);

/// u = 0: per-mode relative error against exp(-4 pi^2 |k|^2 kappa t).
Check check_heat(double kappa, double t, std::uint64_t seed, const SolverParams& params, double tol);

/// Energy bounds with u = 0 and with W_1, both from sin(2 pi x) e_z.
std::vector<Check> check_energy_bounds(double kappa, const SolverParams& params);

/// Solenoidality of solutions without projection, through W_1.
Check check_solenoidal(double kappa, const SolverParams& params, double tol);

struct ConvergenceResult {
  double error_coarse = 0.0;
  double error_fine = 0.0;
  double ratio = 0.0;
};
ConvergenceResult self_convergence(char family, double lambda, const AnalyticMatrixSet& fixtures,
                                   const SolverParams& params);
Check check_self_convergence(char family, double lambda, const AnalyticMatrixSet& fixtures,
                             const SolverParams& params, double lo, double hi);

/// sin(2 pi x) e_z at resolution N.
FourierField standard_initial_field(int N);

}  // namespace dynamo
