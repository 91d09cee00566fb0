#pragma once

// Closed-form model manifolds: flat tori, the round 2-sphere and a compact
// genus-2 hyperbolic surface presented as a regular octagon in the Poincaré disk.
//
// Chart conventions:
//   FlatTorus         coordinates x in [0, L_1) x ... x [0, L_n), Euclidean metric.
//   RoundSphere2      spherical coordinates (theta, phi), theta the polar angle;
//                     metric diag(1, sin^2 theta); poles are outside the chart.
//   HyperbolicOctagon Poincaré disk coordinates z = (z1, z2), metric 4|dz|^2/(1-|z|^2)^2.
//
// Flows are evaluated in an ambient model (R^3 for the sphere, the hyperboloid
// -x0^2 + x1^2 + x2^2 = -1 for the octagon) and mapped back to the chart.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace helab::geometry {

enum class ModelKind { FlatTorus, RoundSphere2, HyperbolicOctagon };

struct ManifoldModel {
  ModelKind kind = ModelKind::FlatTorus;
  int dim = 2;
  std::vector<double> periods;  // FlatTorus only
  double curvature = 0.0;
  // HyperbolicOctagon only. Side k (outward normal at angle k*pi/4) is glued to
  // side k+4. Stored as SL(2,R) matrices acting on the upper half plane; the
  // disk action is their Cayley conjugate.
  std::vector<Eigen::Matrix2d> side_pairings;
  // Same pairings as Lorentz transformations of the hyperboloid (derived).
  std::vector<Eigen::Matrix3d> lorentz_pairings;

  static ManifoldModel flat_torus(int dim, std::vector<double> periods = {});
  static ManifoldModel round_sphere();
  static ManifoldModel hyperbolic_octagon();

  std::string name() const;
  /// Riemannian volume of the whole manifold.
  double volume() const;
};

struct PointState {
  Eigen::VectorXd point;
  Eigen::VectorXd velocity;
};

/// Distance from the octagon center to the midpoint of each side: cosh d = 1 + sqrt(2).
double octagon_inradius();

Eigen::MatrixXd metric_at(const ManifoldModel& model, const Eigen::VectorXd& point);
double inner(const ManifoldModel& model, const Eigen::VectorXd& point, const Eigen::VectorXd& u,
             const Eigen::VectorXd& v);
/// Rescales `velocity` to unit length in the metric at `point`.
PointState unit_state(const ManifoldModel& model, Eigen::VectorXd point, Eigen::VectorXd velocity);

/// True when `point` lies in the chart domain (octagon: inside the fundamental domain, up to `tol`).
bool in_domain(const ManifoldModel& model, const Eigen::VectorXd& point, double tol = 1e-9);

PointState geodesic_advance(const ManifoldModel& model, const PointState& state, double t);

Eigen::VectorXd parallel_transport(const ManifoldModel& model, const PointState& state, double t,
                                   const Eigen::VectorXd& w);

/// Advances the geodesic and transports every vector in `ws` along it in one pass.
PointState transport_along(const ManifoldModel& model, const PointState& state, double t,
                           std::vector<Eigen::VectorXd>& ws);

/// Rotation angle in (-pi, pi] acquired by a vector transported around the closed
/// geodesic polygon through `vertices` (positive = counterclockwise in the chart
/// orientation). For the sphere, vertices of length 3 are read as points of the
/// unit sphere in R^3 so that polygons may touch the poles.
double holonomy(const ManifoldModel& model, const std::vector<Eigen::VectorXd>& vertices);

/// Area of a convex geodesic polygon from its interior angles (Gauss–Bonnet for
/// curvature +-1; shoelace formula in the chart for the flat torus). Vertex
/// conventions as in `holonomy`.
double geodesic_polygon_area(const ManifoldModel& model, const std::vector<Eigen::VectorXd>& vertices);

/// Christoffel symbols Gamma^k_ij at `point`, returned as gamma[k](i, j).
std::vector<Eigen::MatrixXd> christoffel(const ManifoldModel& model, const Eigen::VectorXd& point);

/// Classical 4th-order Runge–Kutta integration of the geodesic and transport
/// equations in the chart. Ignores periodic identifications; used as a cross-check.
struct ChartTransport {
  Eigen::VectorXd point;
  Eigen::VectorXd velocity;
  Eigen::VectorXd transported;
};
ChartTransport integrate_transport_rk4(const ManifoldModel& model, const PointState& state,
                                       const Eigen::VectorXd& w, double t, int steps);

// Hyperboloid / disk conversions for the octagon model.
double lorentz_dot(const Eigen::Vector3d& a, const Eigen::Vector3d& b);
Eigen::Vector3d disk_to_hyperboloid(const Eigen::Vector2d& z);
Eigen::Vector3d disk_vector_to_hyperboloid(const Eigen::Vector2d& z, const Eigen::Vector2d& u);
Eigen::Vector2d hyperboloid_to_disk(const Eigen::Vector3d& x);
Eigen::Vector2d hyperboloid_vector_to_disk(const Eigen::Vector3d& x, const Eigen::Vector3d& v);
/// Lorentz matrix of the disk isometry induced by an SL(2,R) upper-half-plane map.
Eigen::Matrix3d mobius_to_lorentz(const Eigen::Matrix2d& a);

// Sphere conversions between (theta, phi) and the unit sphere in R^3.
Eigen::Vector3d sphere_to_ambient(const Eigen::Vector2d& chart);
Eigen::Vector3d sphere_vector_to_ambient(const Eigen::Vector2d& chart, const Eigen::Vector2d& u);
Eigen::Vector2d ambient_to_sphere(const Eigen::Vector3d& p);
Eigen::Vector2d ambient_vector_to_sphere(const Eigen::Vector3d& p, const Eigen::Vector3d& v);

}  // namespace helab::geometry
