#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "dynamo/flow.hpp"
#include "dynamo/solver.hpp"

namespace dynamo {

using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

Vector3c to_eigen(const Vec3c& v);
Vec3c from_eigen(const Vector3c& v);

/// J_n(z) for n in {0, 1}, |z| <= 10, by its power series.
double bessel_j(int n, double z);
/// J_n(z) = (-1)^n int_0^1 exp(i z sin(2 pi x) + 2 pi i n x) dx by the
/// periodic trapezoid rule on `points` nodes.
double bessel_j_hansen(int n, double z, int points = 64);

/// A 3x3 Fourier matrix element T^{u,kappa}_{s,t}(k, j) and where it came from.
struct ControlMatrix {
  Matrix3c A = Matrix3c::Zero();
  std::string flow_id;
  double kappa = 0.0;
  double s = 0.0;
  double t = 0.0;
  WaveVector k;
  WaveVector j;
};

struct EigenDecomposition {
  std::array<cplx, 3> values{};      // descending modulus
  Matrix3c right = Matrix3c::Zero();  // unit eigenvectors as columns
  Matrix3c left = Matrix3c::Zero();   // rows l_i^H with l_i^H right_j = delta_ij
  double gap = 0.0;                   // min_{i != j} |lambda_i - lambda_j|
  double residual = 0.0;              // max_i |A xi_i - lambda_i xi_i|
  bool hermitian = false;
  bool reliable = true;               // gap above the defectiveness threshold

  bool simple(double threshold = 1e-6) const { return gap > threshold; }
};

inline constexpr double kDefectiveGap = 1e-12;
inline constexpr double kSimplicityGap = 1e-6;
inline constexpr double kProjectionTol = 1e-8;

EigenDecomposition eigen3(const Matrix3c& A);

/// Closed-form matrices at kappa = 0 over one unit of time (two for W), with
/// alpha = J0(pi/2) and beta = 2 pi J1(pi/2).
struct AnalyticMatrixSet {
  double alpha = 0.0;
  double beta = 0.0;

  static AnalyticMatrixSet from_bessel();

  Matrix3c u(double lambda) const;
  Matrix3c v(double lambda) const;
  Matrix3c w(double lambda) const;
  /// Eigenvalues of w(lambda) in descending order: lambda_+, alpha^2, lambda_-.
  std::array<double, 3> w_eigenvalues(double lambda) const;
  /// Unit eigenvectors of w(lambda) matching w_eigenvalues.
  std::array<Vector3c, 3> w_eigenvectors(double lambda) const;
};

/// Columns from three solves with data e_c exp(2 pi i j.x), read at mode k.
ControlMatrix matrix_element(const TimeFlow& flow, double kappa, double s, double t, WaveVector k, WaveVector j,
                             const SolverParams& params);

/// |T^{tau_y u}(k,j) - exp(2 pi i (j-k).y) T^u(k,j)|_F
double translation_identity_residual(const TimeFlow& flow, double kappa, WaveVector k, WaveVector j, const Vec3& y,
                                     const SolverParams& params);

struct AveragedMatrix {
  ControlMatrix matrix;
  bool aliasing_warning = false;  // M < 2N+1
  std::string warning;
};

/// Average over the uniform M^3 grid of translations y of the solution's mode k,
/// for probe data e_c exp(2 pi i k.x) + `others` (one solve per column and y).
AveragedMatrix averaged_matrix(const TimeFlow& flow, double kappa, WaveVector k, int M, const SolverParams& params,
                               const FourierField& others);
/// Same, with no extra probe mass.
AveragedMatrix averaged_matrix(const TimeFlow& flow, double kappa, WaveVector k, int M, const SolverParams& params);

struct ControlChoice {
  int choice = 0;  // 1 or 2
  double factor = 0.0;  // |lambda_1| of the chosen matrix
  std::array<double, 2> projection{};  // relative weight of v on eigendirections with |lambda| > e
  EigenDecomposition eig;
};

struct ControlSelectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Picks the control whose growing eigendirections carry the larger share of v.
ControlChoice control_select(const Vec3c& v, double kappa, const ControlMatrix& A1, const ControlMatrix& A2,
                             double proj_tol = kProjectionTol);

/// min over unit v with e_z.v = 0 of max_i projection_i(v), on a (theta, psi) grid.
double span_margin(const EigenDecomposition& e1, const EigenDecomposition& e2, int samples = 48);

struct ScanRow {
  double kappa = 0.0;
  double gap = 0.0;       // min of both simplicity gaps
  double top1 = 0.0;      // |lambda_1| of A1
  double top2 = 0.0;      // |lambda_1| of A2
  double margin = 0.0;    // span margin
  bool pass = false;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  double kappa0 = -1.0;    // largest kappa with every row up to it passing (-1 if none)
  double lipschitz = 0.0;  // max |d margin| / d kappa between adjacent rows
  double R = 1.0;
  int N = 0;
  double dt = 0.0;

  void write_csv(std::ostream& os) const;
};

ScanResult kappa0_scan(const std::vector<double>& kappas, double R, const SolverParams& params);

nlohmann::json to_json(const Matrix3c& A);
Matrix3c matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ControlMatrix& m);
nlohmann::json to_json(const EigenDecomposition& e);

}  // namespace dynamo
