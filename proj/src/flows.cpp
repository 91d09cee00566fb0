#include "helab/flows.hpp"

#include "helab/parallel.hpp"
#include "helab/quadrature.hpp"
#include "helab/summation.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace helab::flows {

using geometry::ManifoldModel;
using geometry::ModelKind;

namespace {

constexpr double kPi = std::numbers::pi;

// Modified Gram–Schmidt on the columns of an orthonormal-gauge frame, keeping the
// direction of the first column and the orientation.
Eigen::MatrixXd gram_schmidt(Eigen::MatrixXd u) {
  const Eigen::Index n = u.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) u.col(j) -= u.col(i).dot(u.col(j)) * u.col(i);
    u.col(j).normalize();
  }
  if (u.determinant() < 0) u.col(n - 1) = -u.col(n - 1);
  return u;
}

Eigen::Matrix2d rotation2(double a) {
  Eigen::Matrix2d r;
  r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return r;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

Eigen::MatrixXd orthonormal_gauge(const ManifoldModel& model, const Eigen::VectorXd& point) {
  const int n = model.dim;
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n);
  switch (model.kind) {
    case ModelKind::FlatTorus:
      break;
    case ModelKind::RoundSphere2:
      b(1, 1) = 1.0 / std::sin(point(0));
      break;
    case ModelKind::HyperbolicOctagon:
      b *= (1.0 - point.squaredNorm()) / 2.0;
      break;
  }
  return b;
}

FramePoint frame_from_direction(const ManifoldModel& model, const Eigen::VectorXd& point,
                                const Eigen::VectorXd& direction) {
  const int n = model.dim;
  if (point.size() != n || direction.size() != n) {
    throw std::invalid_argument("frame_from_direction: dimension mismatch");
  }
  const Eigen::MatrixXd b = orthonormal_gauge(model, point);
  Eigen::VectorXd u1 = b.inverse() * direction;
  if (!(u1.norm() > 0.0)) throw std::invalid_argument("frame_from_direction: zero direction");
  u1.normalize();
  Eigen::MatrixXd u(n, n);
  u.col(0) = u1;
  if (n == 2) {
    u.col(1) = Eigen::Vector2d(-u1(1), u1(0));
  } else {
    int filled = 1;
    for (int axis = 0; axis < n && filled < n; ++axis) {
      Eigen::VectorXd c = Eigen::VectorXd::Unit(n, axis);
      for (int i = 0; i < filled; ++i) c -= u.col(i).dot(c) * u.col(i);
      if (c.norm() > 0.3) u.col(filled++) = c.normalized();
    }
    if (u.determinant() < 0) u.col(n - 1) = -u.col(n - 1);
  }
  return {point, b * u};
}

double frame_defect(const ManifoldModel& model, const FramePoint& fp) {
  const Eigen::MatrixXd g = geometry::metric_at(model, fp.point);
  const Eigen::Index n = fp.frame.cols();
  return (fp.frame.transpose() * g * fp.frame - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

double frame_orientation(const ManifoldModel& model, const FramePoint& fp) {
  return (orthonormal_gauge(model, fp.point).inverse() * fp.frame).determinant();
}

FramePoint frame_flow(const ManifoldModel& model, const FramePoint& fp, double t) {
  const int n = model.dim;
  if (fp.frame.rows() != n || fp.frame.cols() != n) throw std::invalid_argument("frame_flow: frame size");
  std::vector<Eigen::VectorXd> ws;
  for (int j = 1; j < n; ++j) ws.push_back(fp.frame.col(j));
  const geometry::PointState out =
      geometry::transport_along(model, {fp.point, fp.frame.col(0)}, t, ws);
  FramePoint res{out.point, Eigen::MatrixXd(n, n)};
  res.frame.col(0) = out.velocity;
  for (int j = 1; j < n; ++j) res.frame.col(j) = ws[j - 1];
  if (frame_defect(model, res) > 1e-12) {
    const Eigen::MatrixXd b = orthonormal_gauge(model, res.point);
    res.frame = b * gram_schmidt(b.inverse() * res.frame);
  }
  return res;
}

FramePoint right_action(const FramePoint& fp, const Eigen::MatrixXd& g) {
  const Eigen::Index m = fp.frame.cols() - 1;
  if (g.rows() != m || g.cols() != m) throw std::invalid_argument("right_action: g must be (n-1)x(n-1)");
  if ((g.transpose() * g - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-10 ||
      std::abs(g.determinant() - 1.0) > 1e-10) {
    throw std::invalid_argument("right_action: g is not in SO(n-1)");
  }
  FramePoint out = fp;
  out.frame.rightCols(m) = fp.frame.rightCols(m) * g;
  return out;
}

FlowObservable constant_observable(const Eigen::MatrixXcd& value) {
  FlowObservable f;
  f.fiber_dim = static_cast<int>(value.rows());
  f.evaluator = [value](const FramePoint&) { return value; };
  return f;
}

FlowObservable scalar_observable(std::function<std::complex<double>(const FramePoint&)> fn) {
  FlowObservable f;
  f.evaluator = [fn = std::move(fn)](const FramePoint& x) {
    Eigen::MatrixXcd m(1, 1);
    m(0, 0) = fn(x);
    return m;
  };
  return f;
}

FlowObservable beta_flow(const ManifoldModel& model, const FlowObservable& f, double t) {
  FlowObservable out = f;
  if (t == 0.0) return out;
  out.evaluator = [model, inner = f.evaluator, t](const FramePoint& x) {
    return inner(frame_flow(model, x, -t));
  };
  return out;
}

FlowObservable product(const FlowObservable& f, const FlowObservable& h) {
  if (f.fiber_dim != h.fiber_dim) throw std::invalid_argument("product: fiber dimensions differ");
  FlowObservable out = f;
  out.evaluator = [a = f.evaluator, b = h.evaluator](const FramePoint& x) {
    return Eigen::MatrixXcd(a(x) * b(x));
  };
  return out;
}

FlowObservable adjoint(const FlowObservable& f) {
  FlowObservable out = f;
  out.evaluator = [a = f.evaluator](const FramePoint& x) { return Eigen::MatrixXcd(a(x).adjoint()); };
  return out;
}

double equivariance_residual(const FlowObservable& f, const std::vector<FramePoint>& points) {
  if (!f.equivariance_rep) return 0.0;
  const auto& rep = *f.equivariance_rep;
  double worst = 0.0;
  for (const auto& x : points) {
    const Eigen::MatrixXcd fx = f(x);
    for (const auto& s : rep.samples) {
      const Eigen::Index m = s.element.rows() - 1;
      const Eigen::MatrixXd h = s.element.block(1, 1, m, m);
      const Eigen::MatrixXcd lhs = f(right_action(x, h));
      worst = std::max(worst, (lhs - algebra::conjugation_action(s.matrix, fx)).norm());
    }
  }
  return worst;
}

// --- Liouville x Haar quadrature ----------------------------------------------------

std::vector<LiouvilleNode> liouville_nodes(const ManifoldModel& model, int resolution) {
  if (resolution < 4) throw std::invalid_argument("liouville_nodes: resolution must be at least 4");
  const int r = resolution;
  std::vector<LiouvilleNode> nodes;
  const auto angle = quadrature::periodic_trapezoid(r, 2.0 * kPi);

  switch (model.kind) {
    case ModelKind::FlatTorus: {
      std::vector<quadrature::Rule> base;
      for (double period : model.periods) base.push_back(quadrature::periodic_trapezoid(r, period));
      const double base_w = 1.0 / std::pow(static_cast<double>(r), model.dim);
      std::vector<Eigen::VectorXd> points;
      if (model.dim == 2) {
        for (double x : base[0].nodes)
          for (double y : base[1].nodes) points.push_back(Eigen::Vector2d(x, y));
      } else {
        for (double x : base[0].nodes)
          for (double y : base[1].nodes)
            for (double z : base[2].nodes) points.push_back(Eigen::Vector3d(x, y, z));
      }
      if (model.dim == 2) {
        for (const auto& p : points) {
          for (double a : angle.nodes) {
            nodes.push_back({frame_from_direction(model, p, Eigen::Vector2d(std::cos(a), std::sin(a))),
                             base_w / r});
          }
        }
      } else {
        const auto cosb = quadrature::gauss_legendre(r);
        for (const auto& p : points) {
          for (std::size_t i = 0; i < cosb.nodes.size(); ++i) {
            const double c = cosb.nodes[i], s = std::sqrt(1.0 - c * c);
            for (double ph : angle.nodes) {
              const FramePoint fp =
                  frame_from_direction(model, p, Eigen::Vector3d(s * std::cos(ph), s * std::sin(ph), c));
              for (double psi : angle.nodes) {
                nodes.push_back({right_action(fp, rotation2(psi)), base_w * cosb.weights[i] / 2.0 / (r * r)});
              }
            }
          }
        }
      }
      break;
    }
    case ModelKind::RoundSphere2: {
      const auto cost = quadrature::gauss_legendre(r);
      const auto phi = quadrature::periodic_trapezoid(2 * r, 2.0 * kPi, -kPi);
      for (std::size_t i = 0; i < cost.nodes.size(); ++i) {
        const double th = std::acos(cost.nodes[i]);
        for (double ph : phi.nodes) {
          const Eigen::Vector2d p(th, ph);
          const Eigen::MatrixXd b = orthonormal_gauge(model, p);
          for (double a : angle.nodes) {
            const Eigen::VectorXd e1 = b * Eigen::Vector2d(std::cos(a), std::sin(a));
            nodes.push_back({frame_from_direction(model, p, e1), cost.weights[i] / 2.0 / (2 * r) / r});
          }
        }
      }
      break;
    }
    case ModelKind::HyperbolicOctagon: {
      const double d = geometry::octagon_inradius();
      const auto psi = quadrature::gauss_legendre(r, 0.0, kPi / 8.0);
      for (int sector = 0; sector < 16; ++sector) {
        const double normal = (sector / 2) * kPi / 4.0;
        const double sign = sector % 2 == 0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < psi.nodes.size(); ++i) {
          const double rmax = std::atanh(std::tanh(d) / std::cos(psi.nodes[i]));
          const auto rad = quadrature::gauss_legendre(r, 0.0, rmax);
          const double polar = normal + sign * psi.nodes[i];
          for (std::size_t j = 0; j < rad.nodes.size(); ++j) {
            const double rho = std::tanh(rad.nodes[j] / 2.0);
            const Eigen::Vector2d p(rho * std::cos(polar), rho * std::sin(polar));
            const Eigen::MatrixXd b = orthonormal_gauge(model, p);
            const double w = psi.weights[i] * rad.weights[j] * std::sinh(rad.nodes[j]);
            for (double a : angle.nodes) {
              const Eigen::VectorXd e1 = b * Eigen::Vector2d(std::cos(a), std::sin(a));
              nodes.push_back({frame_from_direction(model, p, e1), w / r});
            }
          }
        }
      }
      break;
    }
  }
  CompensatedSum total;
  for (const auto& n : nodes) total.add(n.weight);
  for (auto& n : nodes) n.weight /= total.value();
  return nodes;
}

Eigen::MatrixXcd liouville_haar_average(const ManifoldModel& model, const FlowObservable& f, int resolution) {
  const auto nodes = liouville_nodes(model, resolution);
  constexpr std::size_t kChunk = 1024;
  const std::size_t chunks = (nodes.size() + kChunk - 1) / kChunk;
  const auto partial = parallel_map<Eigen::MatrixXcd>(chunks, [&](std::size_t c) {
    CompensatedMatrixSum acc(f.fiber_dim, f.fiber_dim);
    const std::size_t end = std::min(nodes.size(), (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) acc.add(nodes[i].weight * f(nodes[i].fp));
    return acc.value();
  });
  CompensatedMatrixSum total(f.fiber_dim, f.fiber_dim);
  for (const auto& p : partial) total.add(p);
  return total.value();
}

// --- Birkhoff averages ----------------------------------------------------------------

double BirkhoffEstimate::gap() const {
  const Eigen::MatrixXcd diff = time_average - space_average;
  if (diff.size() == 1) return std::abs(diff(0, 0));
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(diff);
  return svd.singularValues()(0);
}

namespace {

Eigen::MatrixXcd time_average(const ManifoldModel& model, const FlowObservable& f, FramePoint fp,
                              double horizon, double dt) {
  const long long steps = std::llround(horizon / dt);
  CompensatedMatrixSum acc(f.fiber_dim, f.fiber_dim);
  for (long long k = 0; k < steps; ++k) {
    acc.add(f(fp));
    if (k + 1 < steps) fp = frame_flow(model, fp, dt);
  }
  return acc.value() / static_cast<double>(steps);
}

void check_horizon(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon >= dt)) throw std::invalid_argument("birkhoff_average: need T >= dt > 0");
}

}  // namespace

BirkhoffEstimate birkhoff_average(const ManifoldModel& model, const FlowObservable& f, const FramePoint& fp,
                                  double horizon, double dt, int resolution) {
  return birkhoff_ensemble(model, f, {fp}, horizon, dt, resolution);
}

BirkhoffEstimate birkhoff_ensemble(const ManifoldModel& model, const FlowObservable& f,
                                   const std::vector<FramePoint>& starts, double horizon, double dt,
                                   int resolution) {
  check_horizon(horizon, dt);
  if (starts.empty()) throw std::invalid_argument("birkhoff_ensemble: no starting points");
  BirkhoffEstimate est;
  est.horizon = horizon;
  est.step = dt;
  est.trajectory_count = static_cast<int>(starts.size());
  est.per_trajectory = parallel_map<Eigen::MatrixXcd>(
      starts.size(), [&](std::size_t i) { return time_average(model, f, starts[i], horizon, dt); });
  est.time_average = Eigen::MatrixXcd::Zero(f.fiber_dim, f.fiber_dim);
  for (const auto& m : est.per_trajectory) est.time_average += m;
  est.time_average /= static_cast<double>(starts.size());
  est.space_average = liouville_haar_average(model, f, resolution);
  return est;
}

FramePoint random_frame_point(const ManifoldModel& model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (model.kind) {
    case ModelKind::FlatTorus: {
      Eigen::VectorXd p(model.dim);
      for (int i = 0; i < model.dim; ++i) p(i) = unit(rng) * model.periods[i];
      if (model.dim == 2) {
        const double a = 2.0 * kPi * unit(rng);
        return frame_from_direction(model, p, Eigen::Vector2d(std::cos(a), std::sin(a)));
      }
      std::normal_distribution<double> normal;
      Eigen::Vector3d v;
      do {
        v = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
      } while (v.norm() < 1e-6);
      const FramePoint fp = frame_from_direction(model, p, v);
      return right_action(fp, rotation2(2.0 * kPi * unit(rng)));
    }
    case ModelKind::RoundSphere2: {
      double z;
      do {
        z = 2.0 * unit(rng) - 1.0;
      } while (std::abs(z) > 1.0 - 1e-9);
      const Eigen::Vector2d p(std::acos(z), 2.0 * kPi * unit(rng) - kPi);
      const double a = 2.0 * kPi * unit(rng);
      return frame_from_direction(model, p, orthonormal_gauge(model, p) * Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
    case ModelKind::HyperbolicOctagon: {
      const double cot = 1.0 / std::tan(kPi / 8.0);
      const double r_vertex = std::tanh(std::acosh(cot * cot) / 2.0);
      const double q_min = 1.0 - r_vertex * r_vertex;
      while (true) {
        const double rad = r_vertex * std::sqrt(unit(rng));
        const double ang = 2.0 * kPi * unit(rng);
        const Eigen::Vector2d p(rad * std::cos(ang), rad * std::sin(ang));
        const double q = 1.0 - rad * rad;
        if (unit(rng) > (q_min / q) * (q_min / q) || !geometry::in_domain(model, p, 0.0)) continue;
        const double a = 2.0 * kPi * unit(rng);
        return frame_from_direction(model, p,
                                    orthonormal_gauge(model, p) * Eigen::Vector2d(std::cos(a), std::sin(a)));
      }
    }
  }
  throw std::logic_error("random_frame_point: unknown model");
}

std::vector<TrajectoryRow> sample_trajectory(const ManifoldModel& model, const FlowObservable& f,
                                             const FramePoint& fp, double horizon, double dt) {
  check_horizon(horizon, dt);
  const long long steps = std::llround(horizon / dt);
  std::vector<TrajectoryRow> rows;
  FramePoint x = fp;
  for (long long k = 0; k <= steps; ++k) {
    rows.push_back({k * dt, x, f(x).trace() / static_cast<double>(f.fiber_dim)});
    if (k < steps) x = frame_flow(model, x, dt);
  }
  return rows;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  if (rows.empty()) return;
  const Eigen::Index n = rows.front().fp.point.size();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i + 1;
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = 0; r < n; ++r) out << ",e" << c + 1 << r + 1;
  out << ",value_re,value_im\n";
  for (const auto& row : rows) {
    out << format_double(row.t);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(row.fp.point(i));
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = 0; r < n; ++r) out << ',' << format_double(row.fp.frame(r, c));
    out << ',' << format_double(row.value.real()) << ',' << format_double(row.value.imag()) << '\n';
  }
}

double octagon_center_distance(const Eigen::VectorXd& disk_point) {
  return 2.0 * std::atanh(disk_point.norm());
}

}  // namespace helab::flows
