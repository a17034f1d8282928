#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynamo/flow.hpp"
#include "dynamo/spectral.hpp"

namespace dynamo {

/// Admissible constant in d/dt rho <= C |grad^2 u|_inf rho for the projective
/// ratio rho = |grad b|^2 / |b|^2, when |grad u|_inf and |grad^2 u|_inf are the
/// mode-sum bounds of FlowNorms (so |grad u| <= |grad^2 u| / 2pi) and b is mean-zero:
///   d/dt rho <= 6 G rho + 2 H sqrt(rho) <= (3/pi + 1/pi) H rho.
inline constexpr double kRatioConstant = 4.0 / kPi;

struct SolverParams {
  double dt = 1e-3;
  int N = 16;                 // must match the field resolution (0 = take it from the field)
  bool project_solenoidal = false;
  /// Evaluate the bilinear term on a physical grid instead of by direct convolution.
  bool grid_path = false;
  /// Grid path only: use an alias-free grid (2N + qmax + 1) instead of 2N + 1.
  bool dealias = true;
  int trace_every = 1;        // record a trace sample every this many steps
  std::vector<WaveVector> watch;
};

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TraceSample {
  double t = 0.0;
  double l2sq = 0.0;
  double h1sq = 0.0;
  double int_grad = 0.0;       // int_s^t |grad u|_inf bound
  double int_hess = 0.0;       // int_s^t |grad^2 u|_inf bound
  double int_ratio_growth = 0.0;  // int_s^t exp(C int_s^r |grad^2 u|_inf) dr
  std::vector<Vec3c> watched;
};

struct SolverTrace {
  double kappa = 0.0;
  std::vector<WaveVector> watch;
  std::vector<TraceSample> samples;
  std::vector<std::string> warnings;
  long steps = 0;

  void append(const SolverTrace& later);
  void write_csv(std::ostream& os) const;
};

/// Largest dt that keeps the explicit stage inside the RK4 stability region
/// for every flow mode active on [s, t] and every wavevector in the cube.
double stable_dt(const TimeFlow& flow, double s, double t, int N);
/// Advisory step bound 0.1 / max(1, |u|_inf N).
double advisory_dt(const TimeFlow& flow, int N);

/// Wavevectors reachable from the support of `field` by adding +-q for the
/// flow modes active on [s, t], restricted to the cube.
std::vector<WaveVector> active_closure(const FourierField& field, const TimeFlow& flow, double s, double t);

/// One Strang step from t to t + h.
FourierField step(const FourierField& b, const TimeFlow& flow, double kappa, double t, double h,
                  const SolverParams& params);

struct SolveResult {
  FourierField field;
  SolverTrace trace;
};

/// T_{s,t} b0. The interval is split at flow segment boundaries and each piece
/// is covered by ceil(length / dt) equal steps; pieces without flow modes are
/// propagated by exact diffusion.
SolveResult solve(const FourierField& b0, const TimeFlow& flow, double kappa, double s, double t,
                  const SolverParams& params);
FourierField propagate(const FourierField& b0, const TimeFlow& flow, double kappa, double s, double t,
                       const SolverParams& params);

/// Exact adjoint of the discrete map of `propagate` with respect to sum_k conj(a_k).b_k.
FourierField adjoint_propagate(const FourierField& c, const TimeFlow& flow, double kappa, double s, double t,
                               const SolverParams& params);

/// Exact heat semigroup exp(kappa t Laplacian).
FourierField heat(const FourierField& b, double kappa, double t);

/// Log-space margins this close to zero are the equality case (e.g. heat decay of a
/// single mode), where both sides are the same number up to rounding.
inline constexpr double kMarginRoundoff = 1e-12;

struct BoundMargins {
  bool applicable = false;
  std::string note;
  double constant = kRatioConstant;
  /// min over samples of log(bound) - log(measured); >= 0 means the bound holds
  double upper_margin = 0.0;   // |b(t)| <= exp(int |grad u|) |b(0)|
  double lower_margin = 0.0;   // |b(t)|^2 >= exp(-2 int [kappa rho0 e^{C int H} + G]) |b(0)|^2
  double ratio_margin = 0.0;   // rho(t) <= exp(C int H) rho(0)
  double worst_time = 0.0;

  bool holds(double tol = kMarginRoundoff) const {
    return !applicable || (upper_margin >= -tol && lower_margin >= -tol && ratio_margin >= -tol);
  }
};

BoundMargins energy_growth_check(const SolverTrace& trace);

}  // namespace dynamo
