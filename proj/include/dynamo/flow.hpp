#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dynamo/spectral.hpp"

namespace dynamo {

/// Normalized exponential mollifier on (0, 1/2):
///   phi(t) = c exp(-1 / (t (1/2 - t))),   int_0^{1/2} phi = 1.
class BumpProfile {
 public:
  BumpProfile();

  double operator()(double t) const;
  /// exp(-1 / (t (1/2 - t))) without normalization.
  static double raw(double t);
  double normalization() const { return c_; }
  /// phi(1/4), the maximum.
  double peak() const;

 private:
  double c_;
};

const BumpProfile& bump();

/// Time envelope of a flow mode: either the bump rescaled onto
/// (start, start + duration) with total integral `scale`, or a constant.
struct Envelope {
  enum class Kind { bump, constant };
  Kind kind = Kind::constant;
  double start = 0.0;
  double duration = 0.5;
  double scale = 1.0;

  static Envelope bump_on(double start, double duration, double integral = 1.0);
  static Envelope constant(double value);

  double operator()(double t) const;
  double sup() const;
  Envelope shifted(double dt) const;
};

/// amplitude * envelope(t) * exp(2 pi i k.x), with k . amplitude = 0.
struct FlowMode {
  WaveVector k;
  Vec3c amplitude;
  Envelope envelope;
};

/// Modes active on [begin, end]; the whole segment is translated by `shift`.
struct FlowSegment {
  double begin = 0.0;
  double end = 0.0;
  std::vector<FlowMode> modes;
  Vec3 shift{0.0, 0.0, 0.0};

  double length() const { return end - begin; }
  /// Fourier coefficients (k, uhat_k(t)) at time t, translation applied.
  std::vector<std::pair<WaveVector, Vec3c>> coefficients(double t) const;
};

struct FlowNorms {
  double sup = 0.0;   // bound on |u|_inf
  double grad = 0.0;  // bound on |grad u|_inf (pointwise operator norm)
  double hess = 0.0;  // bound on |grad^2 u|_inf
};

/// Time-dependent divergence-free velocity field built from finitely many
/// Fourier modes, organised as time segments with disjoint interiors.
class TimeFlow {
 public:
  TimeFlow() = default;
  TimeFlow(double start, double end, std::vector<FlowSegment> segments, std::string id = {});

  double start() const { return start_; }
  double end() const { return end_; }
  double lifetime() const { return end_ - start_; }
  const std::vector<FlowSegment>& segments() const { return segments_; }
  const std::string& id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  /// Segment containing t (left-closed; the last segment is closed), or nullptr.
  const FlowSegment* segment_at(double t) const;
  std::vector<std::pair<WaveVector, Vec3c>> coefficients(double t) const;
  Vec3c velocity(double t, const Vec3& x) const;
  cplx divergence(double t, const Vec3& x) const;
  FlowNorms norms_at(double t) const;
  /// Sup over the lifetime, from mode amplitudes and envelope maxima.
  FlowNorms sup_norms() const;
  /// Largest |k|_inf over all modes.
  int max_wavenumber() const;

  TimeFlow shifted(double dt) const;

 private:
  double start_ = 0.0;
  double end_ = 0.0;
  std::vector<FlowSegment> segments_;
  std::string id_;
};

FlowNorms segment_norms(const FlowSegment& segment, double t);
FlowNorms segment_sup_norms(const FlowSegment& segment);

TimeFlow zero_flow(double start, double end);

/// U_lambda: lambda phi(t) cos(2 pi x) e_y on [0,1/2], then
/// (1/4) phi(t - 1/2) sin(2 pi x) e_z on [1/2, 1].
TimeFlow u_flow(double lambda);
/// V_lambda: the same with the roles of x and y exchanged.
TimeFlow v_flow(double lambda);
/// W_lambda: U_lambda on [0,1] followed by V_{-lambda} on [1,2].
TimeFlow w_flow(double lambda);
/// Time-rescaled U_lambda with constant envelopes:
/// 2 lambda cos(2 pi x) e_y on [0,1/2), (1/2) sin(2 pi x) e_z on [1/2,1].
TimeFlow piecewise_constant_u(double lambda);

/// tau_y u(t, x) = u(t, x - y).
TimeFlow translate(const TimeFlow& flow, const Vec3& y);
/// u'(x) = P u(P^T x).
TimeFlow rotate(const TimeFlow& flow, const SignedPermutation& P);

struct TransitiveFlow {
  TimeFlow flow;
  Vec3c mu;
  Vec3c v;
  /// e_z . w != 0, so the first-order transfer v . mu (w . e_z) is nonzero.
  bool predictor_nonzero = false;
};

/// Single conjugate pair eps phi(t) (mu e^{2 pi i (e_z - j).r} + c.c.) on [0,1],
/// translated by y, that couples mode j of the field to e_z.
TransitiveFlow transitive_flow(WaveVector j, const Vec3c& w, double eps, const Vec3& y);

/// Sequential concatenation: each flow is shifted to start where the previous ended.
TimeFlow concat(const std::vector<TimeFlow>& flows);
/// Union of flows at their declared times; overlapping segments are rejected.
TimeFlow merge(const std::vector<TimeFlow>& flows);

nlohmann::json to_json(const TimeFlow& flow);
TimeFlow flow_from_json(const nlohmann::json& j);

}  // namespace dynamo
