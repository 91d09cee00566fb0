#pragma once

// Frame flow on the oriented orthonormal frame bundle of a model manifold, the
// induced flow on frame-bundle observables, and time/space averages.

#include "helab/algebra.hpp"
#include "helab/geometry.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

namespace helab::flows {

/// Base point plus frame; columns of `frame` are e_1..e_n in chart coordinates.
/// e_1 is the flow direction.
struct FramePoint {
  Eigen::VectorXd point;
  Eigen::MatrixXd frame;
};

/// Frame with e_1 along `direction` (rescaled to unit length) completed to an
/// oriented orthonormal frame. For n = 3 the completion is the Gram–Schmidt
/// image of the coordinate axes.
FramePoint frame_from_direction(const geometry::ManifoldModel& model, const Eigen::VectorXd& point,
                                const Eigen::VectorXd& direction);

/// max |F^T G F - I|.
double frame_defect(const geometry::ManifoldModel& model, const FramePoint& fp);
/// Determinant of the frame in an orthonormal gauge (+1 for an oriented frame).
double frame_orientation(const geometry::ManifoldModel& model, const FramePoint& fp);

/// Orthonormal gauge of the chart: columns form an oriented orthonormal frame at `point`.
Eigen::MatrixXd orthonormal_gauge(const geometry::ManifoldModel& model, const Eigen::VectorXd& point);

/// gamma_t: e_1 follows the geodesic, e_2..e_n are parallel transported.
/// Re-orthonormalizes (Gram–Schmidt in the metric) when the defect exceeds 1e-12.
FramePoint frame_flow(const geometry::ManifoldModel& model, const FramePoint& fp, double t);

/// Right action of g in SO(n-1) on (e_2, ..., e_n). Throws std::invalid_argument
/// unless g is orthogonal with determinant 1 (tolerance 1e-10).
FramePoint right_action(const FramePoint& fp, const Eigen::MatrixXd& g);

using Evaluator = std::function<Eigen::MatrixXcd(const FramePoint&)>;

struct FlowObservable {
  Evaluator evaluator;
  int fiber_dim = 1;
  std::optional<algebra::RepresentationTable> equivariance_rep;

  Eigen::MatrixXcd operator()(const FramePoint& fp) const { return evaluator(fp); }
};

FlowObservable constant_observable(const Eigen::MatrixXcd& value);
FlowObservable scalar_observable(std::function<std::complex<double>(const FramePoint&)> f);

/// (beta_t f)(x) = f(gamma_{-t} x).
FlowObservable beta_flow(const geometry::ManifoldModel& model, const FlowObservable& f, double t);
/// Pointwise product and adjoint.
FlowObservable product(const FlowObservable& f, const FlowObservable& h);
FlowObservable adjoint(const FlowObservable& f);

/// max over points and rep samples of ||f(x.g) - rho(g)^{-1} f(x) rho(g)||.
double equivariance_residual(const FlowObservable& f, const std::vector<FramePoint>& points);

struct LiouvilleNode {
  FramePoint fp;
  double weight;
};

/// Product quadrature of the normalized Liouville x Haar measure on the frame
/// bundle; weights sum to 1. `resolution` >= 4 nodes per dimension.
///   torus:   trapezoid on the base, directions and SO(2) fiber (T^3: Gauss–Legendre in cos)
///   sphere:  Gauss–Legendre in cos(theta), trapezoid in phi and direction angle
///   octagon: 16 half-sectors, Gauss–Legendre in the polar angle and in hyperbolic radius
std::vector<LiouvilleNode> liouville_nodes(const geometry::ManifoldModel& model, int resolution);

Eigen::MatrixXcd liouville_haar_average(const geometry::ManifoldModel& model, const FlowObservable& f,
                                        int resolution);

struct BirkhoffEstimate {
  Eigen::MatrixXcd time_average;
  Eigen::MatrixXcd space_average;
  double horizon = 0.0;
  double step = 0.0;
  int trajectory_count = 0;
  std::vector<Eigen::MatrixXcd> per_trajectory;

  /// Operator norm of time_average - space_average.
  double gap() const;
};

/// Time average (dt/T) sum_{k < T/dt} f(gamma_{k dt} fp) and the Liouville x Haar average.
BirkhoffEstimate birkhoff_average(const geometry::ManifoldModel& model, const FlowObservable& f,
                                  const FramePoint& fp, double horizon, double dt = 0.01,
                                  int resolution = 16);

/// Birkhoff averages over several starting points, evaluated in parallel with a
/// fixed reduction order; time_average is the mean over trajectories.
BirkhoffEstimate birkhoff_ensemble(const geometry::ManifoldModel& model, const FlowObservable& f,
                                   const std::vector<FramePoint>& starts, double horizon, double dt = 0.01,
                                   int resolution = 16);

/// Liouville x Haar distributed frame point.
FramePoint random_frame_point(const geometry::ManifoldModel& model, std::mt19937_64& rng);

struct TrajectoryRow {
  double t;
  FramePoint fp;
  std::complex<double> value;  // tr f / fiber_dim
};

std::vector<TrajectoryRow> sample_trajectory(const geometry::ManifoldModel& model, const FlowObservable& f,
                                             const FramePoint& fp, double horizon, double dt);

/// CSV with header t,x1..xn,e11,e12,...,enn,value_re,value_im; e<c><r> is row r of frame column c.
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

/// Hyperbolic distance from the octagon center.
double octagon_center_distance(const Eigen::VectorXd& disk_point);

}  // namespace helab::flows
