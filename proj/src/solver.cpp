#include "dynamo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

namespace dynamo {

namespace {

constexpr double kStabilityLimit = 2.8;

int check_resolution(const FourierField& b, const SolverParams& params) {
  if (params.N > 0 && params.N != b.resolution()) {
    std::ostringstream os;
    os << "solver resolution N=" << params.N << " does not match field resolution " << b.resolution();
    throw std::invalid_argument(os.str());
  }
  if (!(params.dt > 0.0)) throw std::invalid_argument("solver time step must be positive");
  if (params.trace_every < 1) throw std::invalid_argument("trace_every must be >= 1");
  return b.resolution();
}

// Sub-intervals of [s, t] split at segment boundaries; each carries the segment
// active inside it (or nullptr for a flow-free gap).
struct Piece {
  double a;
  double b;
  const FlowSegment* segment;
};

std::vector<Piece> split(const TimeFlow& flow, double s, double t) {
  std::vector<double> cuts{s, t};
  for (const auto& seg : flow.segments()) {
    if (seg.begin > s && seg.begin < t) cuts.push_back(seg.begin);
    if (seg.end > s && seg.end < t) cuts.push_back(seg.end);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    const FlowSegment* seg = nullptr;
    const double mid = 0.5 * (a + b);
    for (const auto& sg : flow.segments())
      if (mid > sg.begin && mid < sg.end && !sg.modes.empty()) seg = &sg;
    pieces.push_back({a, b, seg});
  }
  return pieces;
}

long step_count(double length, double dt) {
  return std::max(1L, static_cast<long>(std::ceil(length / dt - 1e-9)));
}

double sup_velocity(const TimeFlow& flow) { return flow.sup_norms().sup; }

std::vector<std::size_t> support(const FourierField& f) {
  std::vector<std::size_t> out;
  const auto d = f.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i][0] != 0.0 || d[i][1] != 0.0 || d[i][2] != 0.0) out.push_back(i);
  return out;
}

std::vector<WaveVector> closure(const FourierField& f, const std::vector<WaveVector>& qs) {
  const int N = f.resolution();
  std::vector<char> seen(f.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t i : support(f)) {
    seen[i] = 1;
    queue.push_back(i);
  }
  while (!queue.empty()) {
    const WaveVector p = f.wave_vector(queue.front());
    queue.pop_front();
    for (const auto& q : qs) {
      for (const WaveVector k : {p + q, p - q}) {
        if (k.norm_inf() > N) continue;
        const std::size_t j = f.index(k);
        if (!seen[j]) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
    }
  }
  std::vector<WaveVector> out;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) out.push_back(f.wave_vector(i));
  return out;
}

std::vector<WaveVector> segment_wavevectors(const FlowSegment& seg) {
  std::vector<WaveVector> qs;
  for (const auto& m : seg.modes)
    if (std::find(qs.begin(), qs.end(), m.k) == qs.end()) qs.push_back(m.k);
  return qs;
}

// The bilinear operator (L b)_k = sum_q 2 pi i [ -(u_q . p) b_p + (b_p . q) u_q ], p = k - q,
// restricted to an active index set that is closed under the segment's wavevectors.
class Kernel {
 public:
  Kernel(const FourierField& shape, const FlowSegment& seg, std::vector<WaveVector> active)
      : p_(std::move(active)) {
    const int N = shape.resolution();
    idx_.reserve(p_.size());
    for (const auto& p : p_) idx_.push_back(static_cast<int>(shape.index(p)));
    for (const auto& m : seg.modes) {
      Mode mode;
      mode.q = m.k;
      const double arg = -kTwoPi * (m.k.x * seg.shift[0] + m.k.y * seg.shift[1] + m.k.z * seg.shift[2]);
      mode.base = std::polar(1.0, arg) * m.amplitude;
      mode.envelope = m.envelope;
      mode.weight = norm(m.amplitude);
      mode.qnorm = std::sqrt(static_cast<double>(m.k.norm2()));
      mode.target.resize(p_.size());
      for (std::size_t a = 0; a < p_.size(); ++a) {
        const WaveVector k = p_[a] + m.k;
        mode.target[a] = k.norm_inf() <= N ? static_cast<int>(shape.index(k)) : -1;
      }
      modes_.push_back(std::move(mode));
    }
    for (const auto& p : p_) pmax_ = std::max(pmax_, std::sqrt(static_cast<double>(p.norm2())));
  }

  const std::vector<int>& indices() const { return idx_; }
  const std::vector<WaveVector>& wavevectors() const { return p_; }

  // y = L(t) x on the active set.
  void apply(double t, const std::vector<Vec3c>& x, std::vector<Vec3c>& y) const {
    for (int i : idx_) y[i] = Vec3c{};
    const cplx c(0.0, kTwoPi);
    for (const auto& m : modes_) {
      const double e = m.envelope(t);
      if (e == 0.0) continue;
      const Vec3c u = cplx(e) * m.base;
      const Vec3 q{double(m.q.x), double(m.q.y), double(m.q.z)};
      for (std::size_t a = 0; a < p_.size(); ++a) {
        const int k = m.target[a];
        if (k < 0) continue;
        const Vec3c& bp = x[idx_[a]];
        const WaveVector& p = p_[a];
        const cplx s1 = c * (u[0] * double(p.x) + u[1] * double(p.y) + u[2] * double(p.z));
        const cplx s2 = c * (bp[0] * q[0] + bp[1] * q[1] + bp[2] * q[2]);
        Vec3c& out = y[k];
        out[0] += s2 * u[0] - s1 * bp[0];
        out[1] += s2 * u[1] - s1 * bp[1];
        out[2] += s2 * u[2] - s1 * bp[2];
      }
    }
  }

  // y = L(t)^H x on the active set.
  void apply_adjoint(double t, const std::vector<Vec3c>& x, std::vector<Vec3c>& y) const {
    for (int i : idx_) y[i] = Vec3c{};
    const cplx c(0.0, kTwoPi);
    for (const auto& m : modes_) {
      const double e = m.envelope(t);
      if (e == 0.0) continue;
      const Vec3c u = cplx(e) * m.base;
      const Vec3 q{double(m.q.x), double(m.q.y), double(m.q.z)};
      for (std::size_t a = 0; a < p_.size(); ++a) {
        const int k = m.target[a];
        if (k < 0) continue;
        const Vec3c& ck = x[k];
        const WaveVector& p = p_[a];
        const cplx s1 = c * std::conj(u[0] * double(p.x) + u[1] * double(p.y) + u[2] * double(p.z));
        const cplx s2 = c * (std::conj(u[0]) * ck[0] + std::conj(u[1]) * ck[1] + std::conj(u[2]) * ck[2]);
        Vec3c& out = y[idx_[a]];
        out[0] += s1 * ck[0] - s2 * q[0];
        out[1] += s1 * ck[1] - s2 * q[1];
        out[2] += s1 * ck[2] - s2 * q[2];
      }
    }
  }

  // Bounds on |grad u|_inf and |grad^2 u|_inf at time t.
  std::pair<double, double> gradient_bounds(double t) const {
    double g = 0.0, h = 0.0;
    for (const auto& m : modes_) {
      const double w = m.weight * std::abs(m.envelope(t));
      g += kTwoPi * m.qnorm * w;
      h += kTwoPi * kTwoPi * m.qnorm * m.qnorm * w;
    }
    return {g, h};
  }

  double rate_bound() const {
    double r = 0.0;
    for (const auto& m : modes_) r += kTwoPi * m.weight * m.envelope.sup() * (pmax_ + m.qnorm);
    return r;
  }

 private:
  struct Mode {
    WaveVector q;
    Vec3c base;
    Envelope envelope;
    double weight = 0.0;
    double qnorm = 0.0;
    std::vector<int> target;
  };
  std::vector<WaveVector> p_;
  std::vector<int> idx_;
  std::vector<Mode> modes_;
  double pmax_ = 0.0;
};

// Bilinear term evaluated pseudo-spectrally on an M^3 grid.
class GridKernel {
 public:
  GridKernel(int N, const FlowSegment& seg, bool dealias) : N_(N), seg_(seg) {
    int qmax = 0;
    for (const auto& m : seg.modes) qmax = std::max(qmax, m.k.norm_inf());
    qmax_ = std::max(qmax, 1);
    M_ = dealias ? 2 * N + qmax_ + 1 : 2 * N + 1;
  }

  void apply(double t, const std::vector<Vec3c>& x, std::vector<Vec3c>& y) const {
    FourierField b(N_);
    std::copy(x.begin(), x.end(), b.data().begin());
    FourierField u(qmax_);
    for (const auto& [k, a] : seg_.coefficients(t)) u.at(k) = u[k] + a;
    std::array<FourierField, 3> db{FourierField(N_), FourierField(N_), FourierField(N_)};
    std::array<FourierField, 3> du{FourierField(qmax_), FourierField(qmax_), FourierField(qmax_)};
    for (std::size_t i = 0; i < b.size(); ++i) {
      const WaveVector k = b.wave_vector(i);
      for (int j = 0; j < 3; ++j) db[j].data()[i] = cplx(0.0, kTwoPi * k[j]) * b.data()[i];
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
      const WaveVector k = u.wave_vector(i);
      for (int j = 0; j < 3; ++j) du[j].data()[i] = cplx(0.0, kTwoPi * k[j]) * u.data()[i];
    }
    const PhysicalGrid bg = to_physical(b, M_);
    const PhysicalGrid ug = to_physical(u, M_);
    std::array<PhysicalGrid, 3> dbg{to_physical(db[0], M_), to_physical(db[1], M_), to_physical(db[2], M_)};
    std::array<PhysicalGrid, 3> dug{to_physical(du[0], M_), to_physical(du[1], M_), to_physical(du[2], M_)};
    PhysicalGrid r{M_, std::vector<Vec3c>(bg.values.size())};
    for (std::size_t n = 0; n < r.values.size(); ++n) {
      Vec3c acc{};
      for (int j = 0; j < 3; ++j) {
        acc = acc - ug.values[n][j] * dbg[j].values[n];
        acc = acc + bg.values[n][j] * dug[j].values[n];
      }
      r.values[n] = acc;
    }
    const FourierField rf = from_physical(r, N_);
    std::copy(rf.data().begin(), rf.data().end(), y.begin());
  }

 private:
  int N_;
  const FlowSegment& seg_;
  int qmax_ = 1;
  int M_ = 0;
};

void record(SolverTrace& trace, double t, const FourierField& shape, const std::vector<Vec3c>& x,
            const std::vector<int>& idx, double ig, double ih, double ir) {
  TraceSample s;
  s.t = t;
  s.int_grad = ig;
  s.int_hess = ih;
  s.int_ratio_growth = ir;
  for (int i : idx) {
    const WaveVector k = shape.wave_vector(static_cast<std::size_t>(i));
    const double n2 = norm2(x[i]);
    s.l2sq += n2;
    s.h1sq += kTwoPi * kTwoPi * k.norm2() * n2;
  }
  for (const auto& k : trace.watch) s.watched.push_back(shape.contains(k) ? x[shape.index(k)] : Vec3c{});
  trace.samples.push_back(std::move(s));
}

void check_finite(const std::vector<Vec3c>& x, const std::vector<int>& idx, double t, long step) {
  double acc = 0.0;
  for (int i : idx) acc += norm2(x[i]);
  if (!std::isfinite(acc)) {
    std::ostringstream os;
    os << "solver produced a non-finite field at t=" << t << " (step " << step << ", |b|^2=" << acc << ")";
    throw SolverError(os.str());
  }
}

std::vector<int> all_indices(const FourierField& f) {
  std::vector<int> idx(f.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return idx;
}

std::vector<WaveVector> all_wavevectors(const FourierField& f) {
  std::vector<WaveVector> out(f.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.wave_vector(i);
  return out;
}

class Integrator {
 public:
  Integrator(const TimeFlow& flow, double kappa, const SolverParams& params)
      : flow_(flow), kappa_(kappa), params_(params) {
    if (kappa < 0.0) throw std::invalid_argument("diffusivity must be nonnegative");
  }

  FourierField forward(const FourierField& b0, double s, double t, SolverTrace* trace) {
    const int N = check_resolution(b0, params_);
    if (t < s) throw std::invalid_argument("solve interval has t < s");
    FourierField out = b0;
    std::vector<Vec3c> x(b0.data().begin(), b0.data().end());
    if (trace != nullptr) {
      trace->watch = params_.watch;
      const double adv = advisory_dt(flow_, N);
      if (params_.dt > adv) {
        std::ostringstream os;
        os << "dt=" << params_.dt << " exceeds the advisory bound 0.1/max(1,|u|N)=" << adv;
        trace->warnings.push_back(os.str());
      }
      record(*trace, s, b0, x, all_indices(b0), 0.0, 0.0, 0.0);
    }
    for (const Piece& piece : split(flow_, s, t)) {
      if (piece.segment == nullptr) {
        heat_inplace(b0, x, piece.b - piece.a);
        if (trace != nullptr) {
          const auto& last = trace->samples.back();
          const double ir = last.int_ratio_growth + std::exp(kRatioConstant * last.int_hess) * (piece.b - piece.a);
          record(*trace, piece.b, b0, x, support_indices(b0, x), last.int_grad, last.int_hess, ir);
        }
        continue;
      }
      run_piece(b0, x, piece, trace, false);
    }
    std::copy(x.begin(), x.end(), out.data().begin());
    if (params_.project_solenoidal) out = solenoidal_project(out);
    return out;
  }

  FourierField adjoint(const FourierField& c, double s, double t) {
    check_resolution(c, params_);
    if (params_.grid_path) throw std::invalid_argument("adjoint is only available for the convolution path");
    if (params_.project_solenoidal) throw std::invalid_argument("adjoint does not support solenoidal projection");
    if (t < s) throw std::invalid_argument("solve interval has t < s");
    std::vector<Vec3c> x(c.data().begin(), c.data().end());
    auto pieces = split(flow_, s, t);
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
      if (it->segment == nullptr) {
        heat_inplace(c, x, it->b - it->a);
        continue;
      }
      run_piece(c, x, *it, nullptr, true);
    }
    FourierField out(c.resolution(), FourierField::Kind{});
    std::copy(x.begin(), x.end(), out.data().begin());
    return out;
  }

 private:
  void heat_inplace(const FourierField& shape, std::vector<Vec3c>& x, double dt) const {
    if (kappa_ == 0.0 || dt == 0.0) return;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i][0] == 0.0 && x[i][1] == 0.0 && x[i][2] == 0.0) continue;
      const double f = std::exp(-kTwoPi * kTwoPi * shape.wave_vector(i).norm2() * kappa_ * dt);
      x[i] = cplx(f) * x[i];
    }
  }

  static std::vector<int> support_indices(const FourierField& shape, const std::vector<Vec3c>& x) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (x[i][0] != 0.0 || x[i][1] != 0.0 || x[i][2] != 0.0) idx.push_back(static_cast<int>(i));
    return idx;
  }

  void run_piece(const FourierField& shape, std::vector<Vec3c>& x, const Piece& piece, SolverTrace* trace,
                 bool adjoint) {
    const FlowSegment& seg = *piece.segment;
    FourierField current(shape.resolution(), FourierField::Kind{});
    std::copy(x.begin(), x.end(), current.data().begin());
    std::vector<WaveVector> active =
        params_.grid_path ? all_wavevectors(shape) : closure(current, segment_wavevectors(seg));
    Kernel kernel(shape, seg, active);
    std::unique_ptr<GridKernel> grid;
    if (params_.grid_path) grid = std::make_unique<GridKernel>(shape.resolution(), seg, params_.dealias);

    const long n = step_count(piece.b - piece.a, params_.dt);
    const double h = (piece.b - piece.a) / static_cast<double>(n);
    if (h * kernel.rate_bound() > kStabilityLimit) {
      std::ostringstream os;
      os << "time step h=" << h << " violates the RK4 stability guard on [" << piece.a << ", " << piece.b
         << "]: h * rate = " << h * kernel.rate_bound() << " > " << kStabilityLimit
         << " (use dt <= " << kStabilityLimit / kernel.rate_bound() << ")";
      throw SolverError(os.str());
    }

    const auto& idx = kernel.indices();
    const auto& pv = kernel.wavevectors();
    std::vector<double> damp(idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a)
      damp[a] = std::exp(-kTwoPi * kTwoPi * pv[a].norm2() * kappa_ * 0.5 * h);
    const bool diffuse = kappa_ != 0.0;

    std::vector<Vec3c> acc(x.size()), tmp(x.size()), k(x.size()), k2(x.size());
    auto L = [&](double tt, const std::vector<Vec3c>& in, std::vector<Vec3c>& out) {
      if (grid) grid->apply(tt, in, out);
      else kernel.apply(tt, in, out);
    };
    auto Lh = [&](double tt, const std::vector<Vec3c>& in, std::vector<Vec3c>& out) {
      kernel.apply_adjoint(tt, in, out);
    };
    auto damp_half = [&](std::vector<Vec3c>& v) {
      if (!diffuse) return;
      for (std::size_t a = 0; a < idx.size(); ++a) v[idx[a]] = cplx(damp[a]) * v[idx[a]];
    };
    auto axpy = [&](std::vector<Vec3c>& out, const std::vector<Vec3c>& base, double c, const std::vector<Vec3c>& d) {
      for (int i : idx) out[i] = base[i] + cplx(c) * d[i];
    };

    double ig = 0.0, ih = 0.0, ir = 0.0;
    if (trace != nullptr) {
      const auto& last = trace->samples.back();
      ig = last.int_grad;
      ih = last.int_hess;
      ir = last.int_ratio_growth;
    }

    auto forward_step = [&](double t0) {
      damp_half(x);
      const double tm = t0 + 0.5 * h, t1 = t0 + h;
      for (int i : idx) acc[i] = x[i];
      L(t0, x, k);
      axpy(acc, acc, h / 6.0, k);
      axpy(tmp, x, 0.5 * h, k);
      L(tm, tmp, k);
      axpy(acc, acc, h / 3.0, k);
      axpy(tmp, x, 0.5 * h, k);
      L(tm, tmp, k);
      axpy(acc, acc, h / 3.0, k);
      axpy(tmp, x, h, k);
      L(t1, tmp, k);
      axpy(acc, acc, h / 6.0, k);
      for (int i : idx) x[i] = acc[i];
      damp_half(x);
    };

    // Reverse-mode transpose of forward_step.
    auto adjoint_step = [&](double t0) {
      damp_half(x);
      const double tm = t0 + 0.5 * h, t1 = t0 + h;
      for (int i : idx) acc[i] = x[i];
      // a4 = h/6 c
      for (int i : idx) tmp[i] = cplx(h / 6.0) * x[i];
      Lh(t1, tmp, k);  // g4
      axpy(acc, acc, 1.0, k);
      // a3 = h/3 c + h g4
      for (int i : idx) tmp[i] = cplx(h / 3.0) * x[i] + cplx(h) * k[i];
      Lh(tm, tmp, k2);  // g3
      axpy(acc, acc, 1.0, k2);
      // a2 = h/3 c + h/2 g3
      for (int i : idx) tmp[i] = cplx(h / 3.0) * x[i] + cplx(0.5 * h) * k2[i];
      Lh(tm, tmp, k);  // g2
      axpy(acc, acc, 1.0, k);
      // a1 = h/6 c + h/2 g2
      for (int i : idx) tmp[i] = cplx(h / 6.0) * x[i] + cplx(0.5 * h) * k[i];
      Lh(t0, tmp, k2);  // g1
      axpy(acc, acc, 1.0, k2);
      for (int i : idx) x[i] = acc[i];
      damp_half(x);
    };

    if (adjoint) {
      for (long st = n - 1; st >= 0; --st) {
        adjoint_step(piece.a + static_cast<double>(st) * h);
        if ((st & 63) == 0) check_finite(x, idx, piece.a + st * h, st);
      }
      return;
    }

    for (long st = 0; st < n; ++st) {
      const double t0 = piece.a + static_cast<double>(st) * h;
      forward_step(t0);
      if (params_.project_solenoidal) {
        FourierField f(shape.resolution(), FourierField::Kind{});
        std::copy(x.begin(), x.end(), f.data().begin());
        f = solenoidal_project(f);
        std::copy(f.data().begin(), f.data().end(), x.begin());
      }
      if (trace != nullptr) {
        const auto [g0, h0] = kernel.gradient_bounds(t0);
        const auto [gq, hq] = kernel.gradient_bounds(t0 + 0.25 * h);
        const auto [gm, hm] = kernel.gradient_bounds(t0 + 0.5 * h);
        const auto [g1, h1] = kernel.gradient_bounds(t0 + h);
        const double ih_mid = ih + 0.5 * h / 6.0 * (h0 + 4.0 * hq + hm);
        const double ih_end = ih + h / 6.0 * (h0 + 4.0 * hm + h1);
        ir += h / 6.0 *
              (std::exp(kRatioConstant * ih) + 4.0 * std::exp(kRatioConstant * ih_mid) +
               std::exp(kRatioConstant * ih_end));
        ig += h / 6.0 * (g0 + 4.0 * gm + g1);
        ih = ih_end;
        ++trace->steps;
        if ((st + 1) % params_.trace_every == 0 || st + 1 == n)
          record(*trace, piece.a + static_cast<double>(st + 1) * h, shape, x, idx, ig, ih, ir);
      }
      if ((st & 63) == 63 || st + 1 == n) check_finite(x, idx, t0 + h, st);
    }
    if (trace != nullptr) trace->samples.back().t = piece.b;
  }

  const TimeFlow& flow_;
  double kappa_;
  SolverParams params_;
};

}  // namespace

void SolverTrace::append(const SolverTrace& later) {
  if (later.samples.empty()) return;
  if (samples.empty()) {
    *this = later;
    return;
  }
  const TraceSample base = samples.back();
  for (const auto& s : later.samples) {
    if (s.t <= base.t) continue;
    TraceSample c = s;
    c.int_grad += base.int_grad;
    c.int_hess += base.int_hess;
    c.int_ratio_growth = base.int_ratio_growth + std::exp(kRatioConstant * base.int_hess) * s.int_ratio_growth;
    samples.push_back(std::move(c));
  }
  warnings.insert(warnings.end(), later.warnings.begin(), later.warnings.end());
  steps += later.steps;
}

void SolverTrace::write_csv(std::ostream& os) const {
  os << "t,l2sq,h1sq";
  for (const auto& k : watch)
    for (const char c : {'x', 'y', 'z'}) {
      const std::string tag = std::to_string(k.x) + "_" + std::to_string(k.y) + "_" + std::to_string(k.z);
      os << ",re_" << c << "_" << tag << ",im_" << c << "_" << tag;
    }
  os << '\n';
  const auto old = os.precision(17);
  for (const auto& s : samples) {
    os << s.t << ',' << s.l2sq << ',' << s.h1sq;
    for (const auto& w : s.watched)
      for (int i = 0; i < 3; ++i) os << ',' << w[i].real() << ',' << w[i].imag();
    os << '\n';
  }
  os.precision(old);
}

double stable_dt(const TimeFlow& flow, double s, double t, int N) {
  double best = std::numeric_limits<double>::infinity();
  const FourierField full(N);
  for (const Piece& piece : split(flow, s, t)) {
    if (piece.segment == nullptr) continue;
    Kernel kernel(full, *piece.segment, {WaveVector{N, N, N}});
    const double rate = kernel.rate_bound();
    if (rate > 0.0) best = std::min(best, kStabilityLimit / rate);
  }
  return best;
}

double advisory_dt(const TimeFlow& flow, int N) { return 0.1 / std::max(1.0, sup_velocity(flow) * N); }

std::vector<WaveVector> active_closure(const FourierField& field, const TimeFlow& flow, double s, double t) {
  std::vector<WaveVector> qs;
  for (const auto& seg : flow.segments()) {
    if (seg.end <= s || seg.begin >= t) continue;
    for (const auto& q : segment_wavevectors(seg))
      if (std::find(qs.begin(), qs.end(), q) == qs.end()) qs.push_back(q);
  }
  return closure(field, qs);
}

FourierField step(const FourierField& b, const TimeFlow& flow, double kappa, double t, double h,
                  const SolverParams& params) {
  SolverParams p = params;
  p.dt = h;
  return Integrator(flow, kappa, p).forward(b, t, t + h, nullptr);
}

SolveResult solve(const FourierField& b0, const TimeFlow& flow, double kappa, double s, double t,
                  const SolverParams& params) {
  SolveResult r;
  r.trace.kappa = kappa;
  r.field = Integrator(flow, kappa, params).forward(b0, s, t, &r.trace);
  return r;
}

FourierField propagate(const FourierField& b0, const TimeFlow& flow, double kappa, double s, double t,
                       const SolverParams& params) {
  return Integrator(flow, kappa, params).forward(b0, s, t, nullptr);
}

FourierField adjoint_propagate(const FourierField& c, const TimeFlow& flow, double kappa, double s, double t,
                               const SolverParams& params) {
  return Integrator(flow, kappa, params).adjoint(c, s, t);
}

FourierField heat(const FourierField& b, double kappa, double t) {
  FourierField out = b;
  if (kappa == 0.0 || t == 0.0) return out;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double f = std::exp(-kTwoPi * kTwoPi * out.wave_vector(i).norm2() * kappa * t);
    d[i] = cplx(f) * d[i];
  }
  return out;
}

BoundMargins energy_growth_check(const SolverTrace& trace) {
  BoundMargins m;
  if (trace.samples.empty()) {
    m.note = "empty trace";
    return m;
  }
  const TraceSample& s0 = trace.samples.front();
  if (!(s0.l2sq > 0.0)) {
    m.note = "zero initial field: bounds are vacuous";
    return m;
  }
  m.applicable = true;
  const double rho0 = s0.h1sq / s0.l2sq;
  m.upper_margin = m.lower_margin = m.ratio_margin = std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& s : trace.samples) {
    const double dg = s.int_grad - s0.int_grad;
    const double dh = s.int_hess - s0.int_hess;
    const double ir = (s.int_ratio_growth - s0.int_ratio_growth) * std::exp(-kRatioConstant * s0.int_hess);
    const double log_ratio = std::log(s.l2sq / s0.l2sq);
    const double up = 2.0 * dg - log_ratio;  // in log |b|^2
    const double lo = log_ratio + 2.0 * (trace.kappa * rho0 * ir + dg);
    const double rho = s.h1sq / s.l2sq;
    const double ra = kRatioConstant * dh + std::log(rho0) - std::log(rho);
    m.upper_margin = std::min(m.upper_margin, up);
    m.lower_margin = std::min(m.lower_margin, lo);
    m.ratio_margin = std::min(m.ratio_margin, ra);
    const double w = std::min({up, lo, ra});
    if (w < worst) {
      worst = w;
      m.worst_time = s.t;
    }
  }
  return m;
}

}  // namespace dynamo
