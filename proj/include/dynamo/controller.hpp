#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dynamo/flow.hpp"
#include "dynamo/operators.hpp"
#include "dynamo/solver.hpp"

namespace dynamo {

/// A field stored as f * 2^exponent so long growth runs never overflow.
/// Rescaling by powers of two is exact, so replays stay bitwise identical.
struct ScaledField {
  FourierField field;
  long exponent = 0;

  void normalize();
  double log_l2sq() const;
  /// log |bhat(k)|^2, or -inf when the coefficient is exactly zero.
  double log_coeff_sq(WaveVector k) const;
};

struct ControllerParams {
  SolverParams solver;            // N, dt
  double R = 1.0;                 // control amplitude
  int M = 0;                      // translation grid per axis, 0 = 2N+1
  double coeff_tol = 1e-12;       // relative to |b|
  double field_tol = 1e-300;
  double threshold = 0.25;        // target for max_{|k|=1} (1/t) log |bhat(t,k)|^2
  double growth_budget = 60.0;    // time units per growth segment
  double eps0 = 0.5;              // first transitive amplitude
  int eps_halvings = 12;
  double factor_tol = 1e-6;       // greedy block factor slack
  double kappa0 = 0.01;           // certified diffusivity range [0, kappa0]
  bool allow_uncertified = false;
  int trace_every = 25;

  int grid() const { return M > 0 ? M : 2 * solver.N + 1; }
};

/// Spectral data of the two controls W_R, W_{-R} at one diffusivity, plus the
/// adjoint rows used by the translation scan.
struct ControlData {
  ControlMatrix matrix;
  EigenDecomposition eig;
  /// Rows c(j) = T(e_z, j)^H conj(l) of the dominant left eigenvector l,
  /// so that l . (T b)(e_z) = sum_j c(j)^H b(j).
  FourierField adjoint_rows;
};

class ControlCache {
 public:
  explicit ControlCache(ControllerParams params) : params_(std::move(params)) {}
  /// sign = +1 for W_R, -1 for W_{-R}.
  const ControlData& get(double kappa, int sign);
  const ControllerParams& params() const { return params_; }

 private:
  ControllerParams params_;
  std::map<std::pair<double, int>, std::unique_ptr<ControlData>> cache_;
  std::mutex mutex_;
};

struct BlockRecord {
  Vec3 translation{};
  double t_begin = 0.0;
  double predicted = 0.0;    // grid max of |l . bhat(e_z)| after the block
  double grid_mean = 0.0;    // |grid average|, equals |lambda_1| |l . bhat(e_z)| before
  double realized = 0.0;     // simulated |l . bhat(e_z)| after the block
  double factor = 0.0;       // realized / before
  double mean_residual = 0.0;  // |grid average - lambda_1 * projection before| / |projection before|
};

struct GrowthSegmentPlan {
  WaveVector target;       // unit mode rotated onto e_z
  SignedPermutation rotation;
  int choice = 0;          // 1: W_R, 2: W_{-R}
  cplx lambda1 = 0.0;
  double kappa = 0.0;
  std::vector<BlockRecord> blocks;
  bool threshold_reached = false;
  std::string status;

  double min_factor() const;
};

/// Uniform growth-threshold rate: max_{|k|=1} (1/t) log |bhat(t,k)|^2.
double unit_mode_rate(const ScaledField& b, double t);

struct UniqueContinuationCertificate {
  BoundMargins margins;
  double rho0 = 0.0;
  double kappa = 0.0;
  double t_begin = 0.0;
  double t_end = 0.0;
  bool applicable() const { return margins.applicable; }
  bool violated(double tol = kMarginRoundoff) const { return !margins.holds(tol); }
};

/// Evaluates the lower bound, the upper bound and the projective-ratio bound along a trace.
UniqueContinuationCertificate unique_continuation_certificate(const SolverTrace& trace);

struct ScheduleEvent {
  std::string kind;      // idle, transitive, growth-block
  double t_begin = 0.0;
  double t_end = 0.0;
  int visit = 0;         // index n of the visit sequence
  int kappa_index = -1;  // which field the segment serves
};

/// Everything needed to reproduce a run: the flow units in order (each unit is
/// propagated in one solve call, then every field is renormalized).
struct ScheduleState {
  double t = 0.0;
  std::vector<double> kappas;
  std::vector<ScaledField> fields;
  std::vector<TimeFlow> units;
  std::vector<ScheduleEvent> events;
  /// certificates[i] holds one certificate per unit for field i
  std::vector<std::vector<UniqueContinuationCertificate>> certificates;
  bool certify = true;
  /// Called after every unit, e.g. to sample growth rates.
  std::function<void(const ScheduleState&)> on_advance;

  TimeFlow flow() const;
  /// Advances every field through `unit` (on [unit.start(), unit.end()]) and records certificates.
  void advance(const TimeFlow& unit, const ControllerParams& params, const std::string& kind, int visit, int kappa_index);
};

struct RateSample {
  double t = 0.0;
  std::array<double, 6> rates{};  // (1/t) log |bhat(t,k)|^2 per unit mode
  double log_l2sq = 0.0;
  double max_rate() const;
};

struct KappaReport {
  double kappa = 0.0;
  std::vector<RateSample> samples;
  std::vector<double> crossing_times;   // sample times with max_rate >= threshold
  std::vector<double> visit_end_times;  // t_n at which this field's own visit ended with the threshold met
  double final_rate = 0.0;
  double best_rate = -std::numeric_limits<double>::infinity();
  double min_lower_margin = std::numeric_limits<double>::infinity();
  double min_upper_margin = std::numeric_limits<double>::infinity();
  double min_ratio_margin = std::numeric_limits<double>::infinity();
  int certificate_violations = 0;
  int certificates = 0;
  double min_l2_log = std::numeric_limits<double>::infinity();
};

struct GrowthReport {
  std::vector<KappaReport> per_kappa;
  std::vector<GrowthSegmentPlan> plans;
  std::vector<ScheduleEvent> events;
  std::vector<double> t_n;
  double threshold = 0.25;
  double horizon = 0.0;
  std::string status;
  double min_block_factor_margin = std::numeric_limits<double>::infinity();  // min(realized - |lambda_1|)

  void write_csv(std::ostream& os) const;
  nlohmann::json to_json() const;
};

/// Sequence (k1, k1, k2, k1, k2, k3, ...) capped at `count` distinct entries:
/// after the full list appears it keeps cycling through all of it.
int visit_index(int n, int count);

/// Greedy growth on field `index` of `state`, appending flow units and advancing all fields.
GrowthSegmentPlan growth_segment(ScheduleState& state, int index, ControlCache& controls,
                                 const std::function<bool(const ScheduleState&)>& done, double budget, int visit);

/// Moves mass onto a unit mode of field `index` if it has none.
/// Returns false (and leaves the state unchanged) when no flow was needed.
bool transitive_segment(ScheduleState& state, int index, const ControllerParams& params, int visit);

void idle_segment(ScheduleState& state, const ControllerParams& params, double duration, int visit);

struct ScheduleResult {
  ScheduleState state;
  GrowthReport report;
};

/// Single-diffusivity growth run from t = 0 (transitive step if needed, then growth).
ScheduleResult run_growth(const FourierField& b0, double kappa, const ControllerParams& params);

/// Multi-diffusivity schedule: idle, transitive, growth for kappa_{visit(n)}, until the horizon.
ScheduleResult run_schedule(const FourierField& b0, const std::vector<double>& kappas, double horizon,
                            const ControllerParams& params);

struct ReplayResult {
  std::vector<ScaledField> fields;
  double max_relative_difference = 0.0;
  bool bitwise_identical = true;
};

/// Re-simulates every field through the recorded flow units.
ReplayResult replay(const FourierField& b0, const std::vector<double>& kappas, const std::vector<TimeFlow>& units,
                    const SolverParams& solver);
double relative_difference(const ScaledField& a, const ScaledField& b);

nlohmann::json units_to_json(const std::vector<TimeFlow>& units);
std::vector<TimeFlow> units_from_json(const nlohmann::json& j);

}  // namespace dynamo
