#include "helab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace helab::geometry {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kOctagonSides = 8;

double wrap_periodic(double x, double period) {
  double r = x - period * std::floor(x / period);
  if (r >= period) r -= period;
  if (r < 0.0) r = 0.0;
  return r;
}

double side_angle(int k) { return k * kPi / 4.0; }

// Outward unit normal (spacelike) of side k; inside the octagon <x, r_k> < 0.
Eigen::Vector3d side_normal(int k) {
  const double d = octagon_inradius();
  const double th = side_angle(k);
  return {std::sinh(d), std::cosh(d) * std::cos(th), std::cosh(d) * std::sin(th)};
}

Eigen::Matrix2d half_plane_rotation(double theta) {
  Eigen::Matrix2d k;
  k << std::cos(theta / 2), std::sin(theta / 2), -std::sin(theta / 2), std::cos(theta / 2);
  return k;
}

void require_dim(const ManifoldModel& model, const Eigen::VectorXd& v, const char* what) {
  if (v.size() != model.dim) {
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(model.dim) +
                                ", got " + std::to_string(v.size()));
  }
}

// --- ambient flows ---------------------------------------------------------

struct AmbientState {
  Eigen::Vector3d x;
  Eigen::Vector3d v;
  std::vector<Eigen::Vector3d> ws;
};

void sphere_segment(AmbientState& s, double t) {
  const double c = std::cos(t), sn = std::sin(t);
  const Eigen::Vector3d x = s.x, v = s.v;
  for (auto& w : s.ws) {
    const double a = w.dot(v);
    w += a * (-sn * x + (c - 1.0) * v);
  }
  s.x = c * x + sn * v;
  s.v = -sn * x + c * v;
  s.x.normalize();
  s.v -= s.v.dot(s.x) * s.x;
  s.v.normalize();
  for (auto& w : s.ws) w -= w.dot(s.x) * s.x;
}

void hyperboloid_renormalize(AmbientState& s) {
  s.x /= std::sqrt(-lorentz_dot(s.x, s.x));
  if (s.x(0) < 0) s.x = -s.x;
  s.v += lorentz_dot(s.x, s.v) * s.x;
  s.v /= std::sqrt(lorentz_dot(s.v, s.v));
  for (auto& w : s.ws) w += lorentz_dot(s.x, w) * s.x;
}

void hyperboloid_segment(AmbientState& s, double t) {
  const double c = std::cosh(t), sn = std::sinh(t);
  const Eigen::Vector3d x = s.x, v = s.v;
  for (auto& w : s.ws) {
    const double a = lorentz_dot(w, v);
    w += a * (sn * x + (c - 1.0) * v);
  }
  s.x = c * x + sn * v;
  s.v = sn * x + c * v;
  hyperboloid_renormalize(s);
}

void apply_pairing(const ManifoldModel& model, AmbientState& s, int side) {
  const Eigen::Matrix3d& l = model.lorentz_pairings[side];
  s.x = l * s.x;
  s.v = l * s.v;
  for (auto& w : s.ws) w = l * w;
  hyperboloid_renormalize(s);
}

// Pulls a point that has drifted outside the fundamental domain back in.
void reduce_to_domain(const ManifoldModel& model, AmbientState& s) {
  for (int guard = 0; guard < 64; ++guard) {
    int worst = -1;
    double worst_val = 1e-9;
    for (int k = 0; k < kOctagonSides; ++k) {
      const double a = lorentz_dot(s.x, side_normal(k));
      if (a > worst_val) {
        worst_val = a;
        worst = k;
      }
    }
    if (worst < 0) return;
    apply_pairing(model, s, worst);
  }
  throw std::runtime_error("octagon: failed to reduce point to the fundamental domain");
}

// Forward (t >= 0) octagon flow with side-pairing re-entry.
void octagon_forward(const ManifoldModel& model, AmbientState& s, double t) {
  reduce_to_domain(model, s);
  double remaining = t;
  std::int64_t guard = 0;
  while (remaining > 0.0) {
    if (++guard > 100000000) throw std::runtime_error("octagon: too many side crossings");
    int exit_side = -1;
    double exit_time = remaining;
    for (int k = 0; k < kOctagonSides; ++k) {
      const Eigen::Vector3d r = side_normal(k);
      const double a = lorentz_dot(s.x, r);
      const double b = lorentz_dot(s.v, r);
      if (b <= 0.0) continue;
      double tk;
      if (a >= 0.0) {
        tk = 0.0;
      } else if (-a >= b) {
        continue;
      } else {
        tk = std::atanh(-a / b);
      }
      if (tk < exit_time) {
        exit_time = tk;
        exit_side = k;
      }
    }
    if (exit_side < 0) {
      hyperboloid_segment(s, remaining);
      remaining = 0.0;
    } else {
      if (exit_time > 0.0) hyperboloid_segment(s, exit_time);
      apply_pairing(model, s, exit_side);
      remaining -= exit_time;
    }
  }
}

AmbientState to_ambient(const ManifoldModel& model, const PointState& state,
                        const std::vector<Eigen::VectorXd>& ws) {
  AmbientState s;
  if (model.kind == ModelKind::RoundSphere2) {
    const Eigen::Vector2d c = state.point;
    s.x = sphere_to_ambient(c);
    s.v = sphere_vector_to_ambient(c, state.velocity);
    for (const auto& w : ws) s.ws.push_back(sphere_vector_to_ambient(c, w));
  } else {
    const Eigen::Vector2d z = state.point;
    s.x = disk_to_hyperboloid(z);
    s.v = disk_vector_to_hyperboloid(z, state.velocity);
    for (const auto& w : ws) s.ws.push_back(disk_vector_to_hyperboloid(z, w));
  }
  return s;
}

PointState from_ambient(const ManifoldModel& model, const AmbientState& s,
                        std::vector<Eigen::VectorXd>& ws) {
  PointState out;
  if (model.kind == ModelKind::RoundSphere2) {
    const double rho = std::hypot(s.x(0), s.x(1));
    if (rho < 1e-14) throw std::domain_error("sphere: trajectory endpoint at a pole of the chart");
    out.point = ambient_to_sphere(s.x);
    out.velocity = ambient_vector_to_sphere(s.x, s.v);
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i] = ambient_vector_to_sphere(s.x, s.ws[i]);
  } else {
    out.point = hyperboloid_to_disk(s.x);
    out.velocity = hyperboloid_vector_to_disk(s.x, s.v);
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i] = hyperboloid_vector_to_disk(s.x, s.ws[i]);
  }
  return out;
}

}  // namespace

// --- model construction ------------------------------------------------------

double octagon_inradius() { return std::acosh(1.0 + std::sqrt(2.0)); }

ManifoldModel ManifoldModel::flat_torus(int dim, std::vector<double> periods) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("flat_torus: dim must be 2 or 3");
  if (periods.empty()) periods.assign(dim, 2.0 * kPi);
  if (static_cast<int>(periods.size()) != dim) {
    throw std::invalid_argument("flat_torus: need one period per dimension");
  }
  for (double p : periods) {
    if (!(p > 0.0)) throw std::invalid_argument("flat_torus: periods must be positive");
  }
  ManifoldModel m;
  m.kind = ModelKind::FlatTorus;
  m.dim = dim;
  m.periods = std::move(periods);
  m.curvature = 0.0;
  return m;
}

ManifoldModel ManifoldModel::round_sphere() {
  ManifoldModel m;
  m.kind = ModelKind::RoundSphere2;
  m.dim = 2;
  m.curvature = 1.0;
  return m;
}

ManifoldModel ManifoldModel::hyperbolic_octagon() {
  ManifoldModel m;
  m.kind = ModelKind::HyperbolicOctagon;
  m.dim = 2;
  m.curvature = -1.0;
  const double d = octagon_inradius();
  Eigen::Matrix2d dilation = Eigen::Matrix2d::Zero();
  dilation(0, 0) = std::exp(-d);  // translation by -2d along the positive real axis
  dilation(1, 1) = std::exp(d);
  for (int k = 0; k < kOctagonSides; ++k) {
    const Eigen::Matrix2d rot = half_plane_rotation(side_angle(k));
    Eigen::Matrix2d a = rot * dilation * rot.inverse();
    a /= std::sqrt(a.determinant());
    m.side_pairings.push_back(a);
    m.lorentz_pairings.push_back(mobius_to_lorentz(a));
  }
  return m;
}

std::string ManifoldModel::name() const {
  switch (kind) {
    case ModelKind::FlatTorus:
      return "T" + std::to_string(dim);
    case ModelKind::RoundSphere2:
      return "S2";
    case ModelKind::HyperbolicOctagon:
      return "octagon";
  }
  return "unknown";
}

double ManifoldModel::volume() const {
  switch (kind) {
    case ModelKind::FlatTorus: {
      double v = 1.0;
      for (double p : periods) v *= p;
      return v;
    }
    case ModelKind::RoundSphere2:
      return 4.0 * kPi;
    case ModelKind::HyperbolicOctagon:
      return 4.0 * kPi;  // Gauss–Bonnet, genus 2
  }
  return 0.0;
}

// --- conversions ---------------------------------------------------------------

double lorentz_dot(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return -a(0) * b(0) + a(1) * b(1) + a(2) * b(2);
}

Eigen::Vector3d disk_to_hyperboloid(const Eigen::Vector2d& z) {
  const double r2 = z.squaredNorm();
  if (r2 >= 1.0) throw std::domain_error("disk point outside the unit disk");
  const double q = 1.0 - r2;
  return {(1.0 + r2) / q, 2.0 * z(0) / q, 2.0 * z(1) / q};
}

Eigen::Vector3d disk_vector_to_hyperboloid(const Eigen::Vector2d& z, const Eigen::Vector2d& u) {
  const double q = 1.0 - z.squaredNorm();
  const double zu = z.dot(u);
  return {4.0 * zu / (q * q), 2.0 * u(0) / q + 4.0 * z(0) * zu / (q * q),
          2.0 * u(1) / q + 4.0 * z(1) * zu / (q * q)};
}

Eigen::Vector2d hyperboloid_to_disk(const Eigen::Vector3d& x) {
  return {x(1) / (1.0 + x(0)), x(2) / (1.0 + x(0))};
}

Eigen::Vector2d hyperboloid_vector_to_disk(const Eigen::Vector3d& x, const Eigen::Vector3d& v) {
  const double s = 1.0 + x(0);
  return {v(1) / s - x(1) * v(0) / (s * s), v(2) / s - x(2) * v(0) / (s * s)};
}

Eigen::Matrix3d mobius_to_lorentz(const Eigen::Matrix2d& a) {
  using C = std::complex<double>;
  const C i(0.0, 1.0);
  Eigen::Matrix2cd cayley;
  cayley << 1.0, -i, 1.0, i;
  const Eigen::Matrix2cd u = cayley * a.cast<C>() * cayley.inverse();
  auto act = [&](const Eigen::Vector3d& x) {
    const Eigen::Vector2d z = hyperboloid_to_disk(x);
    const C w(z(0), z(1));
    const C image = (u(0, 0) * w + u(0, 1)) / (u(1, 0) * w + u(1, 1));
    return disk_to_hyperboloid(Eigen::Vector2d(image.real(), image.imag()));
  };
  Eigen::Matrix3d x, y;
  x.col(0) = Eigen::Vector3d(1.0, 0.0, 0.0);
  x.col(1) = Eigen::Vector3d(std::cosh(1.0), std::sinh(1.0), 0.0);
  x.col(2) = Eigen::Vector3d(std::cosh(1.0), 0.0, std::sinh(1.0));
  for (int c = 0; c < 3; ++c) y.col(c) = act(x.col(c));
  return y * x.inverse();
}

Eigen::Vector3d sphere_to_ambient(const Eigen::Vector2d& c) {
  const double st = std::sin(c(0));
  return {st * std::cos(c(1)), st * std::sin(c(1)), std::cos(c(0))};
}

Eigen::Vector3d sphere_vector_to_ambient(const Eigen::Vector2d& c, const Eigen::Vector2d& u) {
  const double th = c(0), ph = c(1);
  const Eigen::Vector3d e_theta(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th));
  const Eigen::Vector3d d_phi(-std::sin(th) * std::sin(ph), std::sin(th) * std::cos(ph), 0.0);
  return u(0) * e_theta + u(1) * d_phi;
}

Eigen::Vector2d ambient_to_sphere(const Eigen::Vector3d& p) {
  return {std::acos(std::clamp(p(2), -1.0, 1.0)), std::atan2(p(1), p(0))};
}

Eigen::Vector2d ambient_vector_to_sphere(const Eigen::Vector3d& p, const Eigen::Vector3d& v) {
  const Eigen::Vector2d c = ambient_to_sphere(p);
  const double th = c(0), ph = c(1);
  const Eigen::Vector3d e_theta(std::cos(th) * std::cos(ph), std::cos(th) * std::sin(ph), -std::sin(th));
  const Eigen::Vector3d e_phi(-std::sin(ph), std::cos(ph), 0.0);
  return {v.dot(e_theta), v.dot(e_phi) / std::sin(th)};
}

// --- metric ---------------------------------------------------------------------

bool in_domain(const ManifoldModel& model, const Eigen::VectorXd& point, double tol) {
  if (point.size() != model.dim) return false;
  switch (model.kind) {
    case ModelKind::FlatTorus:
      return point.allFinite();
    case ModelKind::RoundSphere2:
      return point.allFinite() && point(0) > 0.0 && point(0) < kPi && std::sin(point(0)) > 1e-12;
    case ModelKind::HyperbolicOctagon: {
      if (!point.allFinite() || point.squaredNorm() >= 1.0) return false;
      const Eigen::Vector3d x = disk_to_hyperboloid(Eigen::Vector2d(point));
      for (int k = 0; k < kOctagonSides; ++k) {
        if (lorentz_dot(x, side_normal(k)) > tol) return false;
      }
      return true;
    }
  }
  return false;
}

Eigen::MatrixXd metric_at(const ManifoldModel& model, const Eigen::VectorXd& point) {
  require_dim(model, point, "metric_at");
  if (!in_domain(model, point)) throw std::domain_error("metric_at: point outside the chart domain");
  switch (model.kind) {
    case ModelKind::FlatTorus:
      return Eigen::MatrixXd::Identity(model.dim, model.dim);
    case ModelKind::RoundSphere2: {
      Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2);
      const double s = std::sin(point(0));
      g(1, 1) = s * s;
      return g;
    }
    case ModelKind::HyperbolicOctagon: {
      const double q = 1.0 - point.squaredNorm();
      return Eigen::MatrixXd::Identity(2, 2) * (4.0 / (q * q));
    }
  }
  return {};
}

double inner(const ManifoldModel& model, const Eigen::VectorXd& point, const Eigen::VectorXd& u,
             const Eigen::VectorXd& v) {
  return u.dot(metric_at(model, point) * v);
}

PointState unit_state(const ManifoldModel& model, Eigen::VectorXd point, Eigen::VectorXd velocity) {
  const double n = std::sqrt(inner(model, point, velocity, velocity));
  if (!(n > 0.0)) throw std::invalid_argument("unit_state: zero velocity");
  return {std::move(point), velocity / n};
}

// --- flows ----------------------------------------------------------------------

PointState transport_along(const ManifoldModel& model, const PointState& state, double t,
                           std::vector<Eigen::VectorXd>& ws) {
  require_dim(model, state.point, "geodesic state point");
  require_dim(model, state.velocity, "geodesic state velocity");
  for (const auto& w : ws) require_dim(model, w, "transported vector");
  const double speed2 = inner(model, state.point, state.velocity, state.velocity);
  if (std::abs(speed2 - 1.0) > 1e-8) throw std::invalid_argument("geodesic state is not unit speed");

  if (model.kind == ModelKind::FlatTorus) {
    PointState out = state;
    for (int i = 0; i < model.dim; ++i) {
      out.point(i) = wrap_periodic(state.point(i) + t * state.velocity(i), model.periods[i]);
    }
    return out;
  }

  AmbientState s = to_ambient(model, state, ws);
  if (model.kind == ModelKind::RoundSphere2) {
    sphere_segment(s, t);
  } else if (t >= 0.0) {
    octagon_forward(model, s, t);
  } else {
    s.v = -s.v;
    octagon_forward(model, s, -t);
    s.v = -s.v;
  }
  return from_ambient(model, s, ws);
}

PointState geodesic_advance(const ManifoldModel& model, const PointState& state, double t) {
  std::vector<Eigen::VectorXd> none;
  return transport_along(model, state, t, none);
}

Eigen::VectorXd parallel_transport(const ManifoldModel& model, const PointState& state, double t,
                                   const Eigen::VectorXd& w) {
  std::vector<Eigen::VectorXd> ws{w};
  transport_along(model, state, t, ws);
  return ws.front();
}

// --- holonomy -------------------------------------------------------------------

double holonomy(const ManifoldModel& model, const std::vector<Eigen::VectorXd>& vertices) {
  const std::size_t m = vertices.size();
  if (m < 3) throw std::invalid_argument("holonomy: polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < m; ++i) {
    if ((vertices[i] - vertices[(i + 1) % m]).norm() < 1e-12) {
      throw std::invalid_argument("holonomy: degenerate polygon (repeated vertex)");
    }
  }

  if (model.kind == ModelKind::FlatTorus) {
    for (const auto& v : vertices) require_dim(model, v, "holonomy vertex");
    return 0.0;
  }

  if (model.kind == ModelKind::RoundSphere2) {
    std::vector<Eigen::Vector3d> pts;
    for (const auto& v : vertices) {
      if (v.size() == 3) {
        pts.push_back(v.normalized());
      } else {
        require_dim(model, v, "holonomy vertex");
        pts.push_back(sphere_to_ambient(Eigen::Vector2d(v)));
      }
    }
    auto direction = [](const Eigen::Vector3d& p, const Eigen::Vector3d& q) {
      Eigen::Vector3d u = q - p.dot(q) * p;
      if (u.norm() < 1e-14) throw std::invalid_argument("holonomy: antipodal or coincident vertices");
      return Eigen::Vector3d(u.normalized());
    };
    const Eigen::Vector3d w0 = direction(pts[0], pts[1]);
    AmbientState s;
    s.ws = {w0};
    for (std::size_t i = 0; i < m; ++i) {
      const Eigen::Vector3d& p = pts[i];
      const Eigen::Vector3d& q = pts[(i + 1) % m];
      s.x = p;
      s.v = direction(p, q);
      sphere_segment(s, std::acos(std::clamp(p.dot(q), -1.0, 1.0)));
    }
    const Eigen::Vector3d& wf = s.ws.front();
    const Eigen::Vector3d& p0 = pts[0];
    return std::atan2(p0.dot(w0.cross(wf)), w0.dot(wf));
  }

  // Hyperbolic: polygon in the disk chart, no side-pairing re-entry.
  std::vector<Eigen::Vector3d> pts;
  for (const auto& v : vertices) {
    require_dim(model, v, "holonomy vertex");
    pts.push_back(disk_to_hyperboloid(Eigen::Vector2d(v)));
  }
  auto direction = [](const Eigen::Vector3d& p, const Eigen::Vector3d& q) {
    Eigen::Vector3d u = q + lorentz_dot(p, q) * p;
    return Eigen::Vector3d(u / std::sqrt(lorentz_dot(u, u)));
  };
  const Eigen::Vector3d w0 = direction(pts[0], pts[1]);
  AmbientState s;
  s.ws = {w0};
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Vector3d& p = pts[i];
    const Eigen::Vector3d& q = pts[(i + 1) % m];
    s.x = p;
    s.v = direction(p, q);
    hyperboloid_segment(s, std::acosh(std::max(1.0, -lorentz_dot(p, q))));
  }
  const Eigen::Vector2d a = hyperboloid_vector_to_disk(pts[0], w0);
  const Eigen::Vector2d b = hyperboloid_vector_to_disk(pts[0], s.ws.front());
  return std::atan2(a(0) * b(1) - a(1) * b(0), a.dot(b));
}

double geodesic_polygon_area(const ManifoldModel& model, const std::vector<Eigen::VectorXd>& vertices) {
  const std::size_t m = vertices.size();
  if (m < 3) throw std::invalid_argument("geodesic_polygon_area: polygon needs at least 3 vertices");
  if (model.kind == ModelKind::FlatTorus) {
    double twice = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto& p = vertices[i];
      const auto& q = vertices[(i + 1) % m];
      twice += p(0) * q(1) - p(1) * q(0);
    }
    return std::abs(twice) / 2.0;
  }
  double angle_sum = 0.0;
  if (model.kind == ModelKind::RoundSphere2) {
    std::vector<Eigen::Vector3d> pts;
    for (const auto& v : vertices) {
      pts.push_back(v.size() == 3 ? Eigen::Vector3d(v.normalized()) : sphere_to_ambient(Eigen::Vector2d(v)));
    }
    for (std::size_t i = 0; i < m; ++i) {
      const Eigen::Vector3d& p = pts[i];
      const Eigen::Vector3d a = (pts[(i + 1) % m] - p.dot(pts[(i + 1) % m]) * p).normalized();
      const Eigen::Vector3d b = (pts[(i + m - 1) % m] - p.dot(pts[(i + m - 1) % m]) * p).normalized();
      angle_sum += std::acos(std::clamp(a.dot(b), -1.0, 1.0));
    }
    return angle_sum - (static_cast<double>(m) - 2.0) * kPi;
  }
  std::vector<Eigen::Vector3d> pts;
  for (const auto& v : vertices) pts.push_back(disk_to_hyperboloid(Eigen::Vector2d(v)));
  auto toward = [](const Eigen::Vector3d& p, const Eigen::Vector3d& q) {
    const Eigen::Vector3d u = q + lorentz_dot(p, q) * p;
    return Eigen::Vector3d(u / std::sqrt(lorentz_dot(u, u)));
  };
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Vector3d a = toward(pts[i], pts[(i + 1) % m]);
    const Eigen::Vector3d b = toward(pts[i], pts[(i + m - 1) % m]);
    angle_sum += std::acos(std::clamp(lorentz_dot(a, b), -1.0, 1.0));
  }
  return (static_cast<double>(m) - 2.0) * kPi - angle_sum;
}

// --- generic chart integrator ------------------------------------------------------

std::vector<Eigen::MatrixXd> christoffel(const ManifoldModel& model, const Eigen::VectorXd& point) {
  const int n = model.dim;
  std::vector<Eigen::MatrixXd> gamma(n, Eigen::MatrixXd::Zero(n, n));
  switch (model.kind) {
    case ModelKind::FlatTorus:
      break;
    case ModelKind::RoundSphere2: {
      const double s = std::sin(point(0)), c = std::cos(point(0));
      gamma[0](1, 1) = -s * c;
      gamma[1](0, 1) = gamma[1](1, 0) = c / s;
      break;
    }
    case ModelKind::HyperbolicOctagon: {
      const double q = 1.0 - point.squaredNorm();
      const Eigen::Vector2d dphi = 2.0 * Eigen::Vector2d(point) / q;
      for (int k = 0; k < 2; ++k) {
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            gamma[k](i, j) = (i == k ? dphi(j) : 0.0) + (j == k ? dphi(i) : 0.0) - (i == j ? dphi(k) : 0.0);
          }
        }
      }
      break;
    }
  }
  return gamma;
}

ChartTransport integrate_transport_rk4(const ManifoldModel& model, const PointState& state,
                                       const Eigen::VectorXd& w, double t, int steps) {
  if (steps < 1) throw std::invalid_argument("integrate_transport_rk4: steps must be positive");
  const int n = model.dim;
  Eigen::VectorXd y(3 * n);
  y << state.point, state.velocity, w;
  auto rhs = [&](const Eigen::VectorXd& s) {
    const Eigen::VectorXd x = s.segment(0, n), v = s.segment(n, n), u = s.segment(2 * n, n);
    const auto gamma = christoffel(model, x);
    Eigen::VectorXd out(3 * n);
    out.segment(0, n) = v;
    for (int k = 0; k < n; ++k) {
      out(n + k) = -v.dot(gamma[k] * v);
      out(2 * n + k) = -v.dot(gamma[k] * u);
    }
    return out;
  };
  const double h = t / steps;
  for (int i = 0; i < steps; ++i) {
    const Eigen::VectorXd k1 = rhs(y);
    const Eigen::VectorXd k2 = rhs(y + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(y + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return {y.segment(0, n), y.segment(n, n), y.segment(2 * n, n)};
}

}  // namespace helab::geometry
