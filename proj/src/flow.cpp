#include "dynamo/flow.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dynamo {

namespace {

double integrate_raw_bump() {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  // split at the peak so both halves are smooth on their closed intervals
  const double left = gauss_kronrod<double, 61>::integrate(BumpProfile::raw, 0.0, 0.25, 15, 1e-15, &error);
  const double right = gauss_kronrod<double, 61>::integrate(BumpProfile::raw, 0.25, 0.5, 15, 1e-15, &error);
  return left + right;
}

Vec3c phase_shift(const Vec3c& a, WaveVector k, const Vec3& y) {
  const double arg = -kTwoPi * (k.x * y[0] + k.y * y[1] + k.z * y[2]);
  return std::polar(1.0, arg) * a;
}

FlowMode make_mode(WaveVector k, const Vec3c& amplitude, const Envelope& envelope) {
  if (std::abs(dot(k, amplitude)) > 1e-14 * (1.0 + norm(amplitude)))
    throw std::invalid_argument("flow mode is not divergence-free at k=" + to_string(k));
  return FlowMode{k, amplitude, envelope};
}

// c cos(2 pi k.x) d  ->  modes (k, c d / 2), (-k, c d / 2)
void push_cos(std::vector<FlowMode>& modes, WaveVector k, const Vec3& d, double c, const Envelope& env) {
  const Vec3c a{0.5 * c * d[0], 0.5 * c * d[1], 0.5 * c * d[2]};
  modes.push_back(make_mode(k, a, env));
  modes.push_back(make_mode(-k, a, env));
}

// c sin(2 pi k.x) d  ->  modes (k, c d / 2i), (-k, -c d / 2i)
void push_sin(std::vector<FlowMode>& modes, WaveVector k, const Vec3& d, double c, const Envelope& env) {
  const cplx f = c / cplx(0.0, 2.0);
  const Vec3c a{f * d[0], f * d[1], f * d[2]};
  modes.push_back(make_mode(k, a, env));
  modes.push_back(make_mode(-k, conj(a), env));
}

// Two-stage shear flow shared by U and V: lambda phi(t) cos(2 pi k.x) d on [0,1/2],
// (1/4) phi(t-1/2) sin(2 pi k.x) e_z on [1/2,1].
TimeFlow shear_flow(double lambda, WaveVector k, const Vec3& d, const std::string& id) {
  FlowSegment first{0.0, 0.5, {}, {0.0, 0.0, 0.0}};
  FlowSegment second{0.5, 1.0, {}, {0.0, 0.0, 0.0}};
  push_cos(first.modes, k, d, lambda, Envelope::bump_on(0.0, 0.5));
  push_sin(second.modes, k, {0.0, 0.0, 1.0}, 0.25, Envelope::bump_on(0.5, 0.5));
  return TimeFlow(0.0, 1.0, {first, second}, id);
}

std::string lambda_tag(double lambda) {
  std::ostringstream os;
  os.precision(17);
  os << lambda;
  return os.str();
}

}  // namespace

BumpProfile::BumpProfile() : c_(1.0 / integrate_raw_bump()) {}

double BumpProfile::raw(double t) {
  if (t <= 0.0 || t >= 0.5) return 0.0;
  return std::exp(-1.0 / (t * (0.5 - t)));
}

double BumpProfile::operator()(double t) const { return c_ * raw(t); }

double BumpProfile::peak() const { return (*this)(0.25); }

const BumpProfile& bump() {
  static const BumpProfile profile;
  return profile;
}

Envelope Envelope::bump_on(double start, double duration, double integral) {
  if (duration <= 0.0) throw std::invalid_argument("bump envelope needs positive duration");
  return Envelope{Kind::bump, start, duration, integral};
}

Envelope Envelope::constant(double value) { return Envelope{Kind::constant, 0.0, 0.0, value}; }

double Envelope::operator()(double t) const {
  if (kind == Kind::constant) return scale;
  // phi has support (0, 1/2) and unit mass; stretch it onto (start, start + duration)
  const double stretch = 2.0 * duration;
  return scale / stretch * bump()((t - start) / stretch);
}

double Envelope::sup() const {
  if (kind == Kind::constant) return std::abs(scale);
  return std::abs(scale) / (2.0 * duration) * bump().peak();
}

Envelope Envelope::shifted(double dt) const {
  Envelope e = *this;
  if (kind == Kind::bump) e.start += dt;
  return e;
}

std::vector<std::pair<WaveVector, Vec3c>> FlowSegment::coefficients(double t) const {
  std::vector<std::pair<WaveVector, Vec3c>> out;
  out.reserve(modes.size());
  const bool shifted = shift[0] != 0.0 || shift[1] != 0.0 || shift[2] != 0.0;
  for (const auto& m : modes) {
    const double e = m.envelope(t);
    if (e == 0.0) continue;
    Vec3c a = cplx(e) * m.amplitude;
    if (shifted) a = phase_shift(a, m.k, shift);
    out.emplace_back(m.k, a);
  }
  return out;
}

TimeFlow::TimeFlow(double start, double end, std::vector<FlowSegment> segments, std::string id)
    : start_(start), end_(end), segments_(std::move(segments)), id_(std::move(id)) {
  if (end_ < start_) throw std::invalid_argument("flow lifetime has negative length");
  std::sort(segments_.begin(), segments_.end(),
            [](const FlowSegment& a, const FlowSegment& b) { return a.begin < b.begin; });
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (s.end < s.begin) throw std::invalid_argument("flow segment has negative length");
    if (s.begin < start_ - 1e-12 || s.end > end_ + 1e-12)
      throw std::invalid_argument("flow segment lies outside the flow lifetime");
    if (i > 0 && s.begin < segments_[i - 1].end - 1e-12)
      throw std::invalid_argument("flow segments overlap");
  }
}

const FlowSegment* TimeFlow::segment_at(double t) const {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    const bool last = i + 1 == segments_.size() || segments_[i + 1].begin > s.end;
    if (t >= s.begin && (t < s.end || (last && t == s.end))) return &s;
  }
  return nullptr;
}

std::vector<std::pair<WaveVector, Vec3c>> TimeFlow::coefficients(double t) const {
  const FlowSegment* s = segment_at(t);
  if (s == nullptr) return {};
  return s->coefficients(t);
}

Vec3c TimeFlow::velocity(double t, const Vec3& x) const {
  Vec3c u{};
  for (const auto& [k, a] : coefficients(t)) {
    const cplx e = std::polar(1.0, kTwoPi * (k.x * x[0] + k.y * x[1] + k.z * x[2]));
    u = u + e * a;
  }
  return u;
}

cplx TimeFlow::divergence(double t, const Vec3& x) const {
  cplx d = 0.0;
  for (const auto& [k, a] : coefficients(t)) {
    const cplx e = std::polar(1.0, kTwoPi * (k.x * x[0] + k.y * x[1] + k.z * x[2]));
    d += cplx(0.0, kTwoPi) * e * dot(k, a);
  }
  return d;
}

namespace {

FlowNorms accumulate(const std::vector<std::pair<WaveVector, double>>& weights) {
  FlowNorms n;
  for (const auto& [k, w] : weights) {
    const double kk = std::sqrt(static_cast<double>(k.norm2()));
    n.sup += w;
    n.grad += kTwoPi * kk * w;
    n.hess += kTwoPi * kTwoPi * kk * kk * w;
  }
  return n;
}

FlowNorms max_norms(const FlowNorms& a, const FlowNorms& b) {
  return {std::max(a.sup, b.sup), std::max(a.grad, b.grad), std::max(a.hess, b.hess)};
}

}  // namespace

FlowNorms segment_norms(const FlowSegment& segment, double t) {
  std::vector<std::pair<WaveVector, double>> w;
  for (const auto& m : segment.modes) w.emplace_back(m.k, norm(m.amplitude) * std::abs(m.envelope(t)));
  return accumulate(w);
}

FlowNorms segment_sup_norms(const FlowSegment& segment) {
  std::vector<std::pair<WaveVector, double>> w;
  for (const auto& m : segment.modes) w.emplace_back(m.k, norm(m.amplitude) * m.envelope.sup());
  return accumulate(w);
}

FlowNorms TimeFlow::norms_at(double t) const {
  const FlowSegment* s = segment_at(t);
  return s == nullptr ? FlowNorms{} : segment_norms(*s, t);
}

FlowNorms TimeFlow::sup_norms() const {
  FlowNorms n;
  for (const auto& s : segments_) n = max_norms(n, segment_sup_norms(s));
  return n;
}

int TimeFlow::max_wavenumber() const {
  int m = 0;
  for (const auto& s : segments_)
    for (const auto& mode : s.modes) m = std::max(m, mode.k.norm_inf());
  return m;
}

TimeFlow TimeFlow::shifted(double dt) const {
  std::vector<FlowSegment> segs = segments_;
  for (auto& s : segs) {
    s.begin += dt;
    s.end += dt;
    for (auto& m : s.modes) m.envelope = m.envelope.shifted(dt);
  }
  return TimeFlow(start_ + dt, end_ + dt, std::move(segs), id_);
}

TimeFlow zero_flow(double start, double end) { return TimeFlow(start, end, {}, "zero"); }

TimeFlow u_flow(double lambda) { return shear_flow(lambda, kEx, {0.0, 1.0, 0.0}, "U(" + lambda_tag(lambda) + ")"); }

TimeFlow v_flow(double lambda) { return shear_flow(lambda, kEy, {1.0, 0.0, 0.0}, "V(" + lambda_tag(lambda) + ")"); }

TimeFlow w_flow(double lambda) {
  TimeFlow f = concat({u_flow(lambda), v_flow(-lambda)});
  f.set_id("W(" + lambda_tag(lambda) + ")");
  return f;
}

TimeFlow piecewise_constant_u(double lambda) {
  FlowSegment first{0.0, 0.5, {}, {0.0, 0.0, 0.0}};
  FlowSegment second{0.5, 1.0, {}, {0.0, 0.0, 0.0}};
  push_cos(first.modes, kEx, {0.0, 1.0, 0.0}, 2.0 * lambda, Envelope::constant(1.0));
  push_sin(second.modes, kEx, {0.0, 0.0, 1.0}, 0.5, Envelope::constant(1.0));
  return TimeFlow(0.0, 1.0, {first, second}, "Upc(" + lambda_tag(lambda) + ")");
}

TimeFlow translate(const TimeFlow& flow, const Vec3& y) {
  std::vector<FlowSegment> segs = flow.segments();
  for (auto& s : segs)
    for (int i = 0; i < 3; ++i) s.shift[i] += y[i];
  return TimeFlow(flow.start(), flow.end(), std::move(segs), flow.id());
}

TimeFlow rotate(const TimeFlow& flow, const SignedPermutation& P) {
  std::vector<FlowSegment> segs = flow.segments();
  for (auto& s : segs) {
    s.shift = P.apply(s.shift);
    for (auto& m : s.modes) {
      m.k = P.apply(m.k);
      m.amplitude = P.apply(m.amplitude);
    }
  }
  return TimeFlow(flow.start(), flow.end(), std::move(segs), flow.id());
}

TransitiveFlow transitive_flow(WaveVector j, const Vec3c& w, double eps, const Vec3& y) {
  if (j == WaveVector{} || j == kEz) throw std::invalid_argument("transitive flow needs j != 0, e_z");
  if (norm(w) == 0.0) throw std::invalid_argument("transitive flow needs w != 0");

  // v with w.v = e_z.v = 0 and |v| = 1 (bilinear pairing); v = (w_y, -w_x, 0) up to scale
  Vec3c v{w[1], -w[0], 0.0};
  if (norm(v) < 1e-14 * norm(w)) v = {1.0, 0.0, 0.0};
  v = cplx(1.0 / norm(v)) * v;

  const WaveVector q = kEz - j;
  const Vec3c qc = to_complex(q);
  const Vec3c mu = v - (dot(v, qc) / static_cast<double>(q.norm2())) * qc;
  if (norm(mu) == 0.0) throw std::logic_error("transitive flow: mu vanished, inputs contradict preconditions");

  FlowSegment seg{0.0, 1.0, {}, {0.0, 0.0, 0.0}};
  if (eps != 0.0) {
    const Envelope env = Envelope::bump_on(0.0, 0.5);
    seg.modes.push_back(make_mode(q, cplx(eps) * mu, env));
    seg.modes.push_back(make_mode(-q, cplx(eps) * conj(mu), env));
  }
  TimeFlow flow = translate(TimeFlow(0.0, 1.0, {seg}, "transitive" + to_string(j)), y);

  TransitiveFlow out{std::move(flow), mu, v, false};
  out.predictor_nonzero = std::abs(w[2]) > 0.0 && std::abs(dot(v, mu)) > 0.0;
  return out;
}

TimeFlow concat(const std::vector<TimeFlow>& flows) {
  if (flows.empty()) return zero_flow(0.0, 0.0);
  if (flows.size() == 1) return flows.front();
  std::vector<FlowSegment> segs;
  const double start = flows.front().start();
  double t = start;
  for (const auto& f : flows) {
    const TimeFlow g = f.shifted(t - f.start());
    for (const auto& s : g.segments()) segs.push_back(s);
    t += f.lifetime();
  }
  return TimeFlow(start, t, std::move(segs));
}

TimeFlow merge(const std::vector<TimeFlow>& flows) {
  if (flows.empty()) return zero_flow(0.0, 0.0);
  double start = std::numeric_limits<double>::infinity();
  double end = -std::numeric_limits<double>::infinity();
  std::vector<FlowSegment> segs;
  for (const auto& f : flows) {
    start = std::min(start, f.start());
    end = std::max(end, f.end());
    for (const auto& s : f.segments()) segs.push_back(s);
  }
  return TimeFlow(start, end, std::move(segs));
}

namespace {

nlohmann::json vec_json(const Vec3c& a) {
  return {{"re", {a[0].real(), a[1].real(), a[2].real()}}, {"im", {a[0].imag(), a[1].imag(), a[2].imag()}}};
}

Vec3c vec_from_json(const nlohmann::json& j) {
  Vec3c a;
  for (int i = 0; i < 3; ++i) a[i] = cplx(j.at("re").at(i).get<double>(), j.at("im").at(i).get<double>());
  return a;
}

}  // namespace

nlohmann::json to_json(const TimeFlow& flow) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : flow.segments()) {
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& m : s.modes) {
      nlohmann::json mj = vec_json(m.amplitude);
      mj["k"] = {m.k.x, m.k.y, m.k.z};
      if (m.envelope.kind == Envelope::Kind::bump)
        mj["envelope"] = {{"kind", "bump"}, {"start", m.envelope.start}, {"duration", m.envelope.duration},
                          {"scale", m.envelope.scale}};
      else
        mj["envelope"] = {{"kind", "constant"}, {"scale", m.envelope.scale}};
      modes.push_back(std::move(mj));
    }
    segs.push_back({{"begin", s.begin}, {"end", s.end}, {"shift", s.shift}, {"modes", std::move(modes)}});
  }
  return {{"id", flow.id()}, {"start", flow.start()}, {"end", flow.end()}, {"segments", std::move(segs)}};
}

TimeFlow flow_from_json(const nlohmann::json& j) {
  std::vector<FlowSegment> segs;
  for (const auto& sj : j.at("segments")) {
    FlowSegment s;
    s.begin = sj.at("begin").get<double>();
    s.end = sj.at("end").get<double>();
    s.shift = sj.at("shift").get<Vec3>();
    for (const auto& mj : sj.at("modes")) {
      const auto k = mj.at("k").get<std::array<int, 3>>();
      const auto& ej = mj.at("envelope");
      Envelope env;
      if (ej.at("kind").get<std::string>() == "bump")
        env = Envelope::bump_on(ej.at("start").get<double>(), ej.at("duration").get<double>(),
                                ej.at("scale").get<double>());
      else
        env = Envelope::constant(ej.at("scale").get<double>());
      s.modes.push_back(FlowMode{{k[0], k[1], k[2]}, vec_from_json(mj), env});
    }
    segs.push_back(std::move(s));
  }
  return TimeFlow(j.at("start").get<double>(), j.at("end").get<double>(), std::move(segs),
                  j.value("id", std::string{}));
}

}  // namespace dynamo
