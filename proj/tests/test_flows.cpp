#include "helab/flows.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace helab;
using namespace helab::flows;
using geometry::ManifoldModel;
using cd = std::complex<double>;

namespace {

double frame_distance(const FramePoint& a, const FramePoint& b) {
  return std::max((a.point - b.point).cwiseAbs().maxCoeff(), (a.frame - b.frame).cwiseAbs().maxCoeff());
}

std::vector<FramePoint> seeded_points(const ManifoldModel& model, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FramePoint> out;
  for (int i = 0; i < count; ++i) out.push_back(random_frame_point(model, rng));
  return out;
}

Eigen::MatrixXd so_minus_one(int n, double angle) {
  if (n == 2) return Eigen::MatrixXd::Identity(1, 1);
  return oracle::rotation_xy(n - 1, 0, 1, angle);
}

}  // namespace

TEST_CASE("frame flow at t = 0 is the identity") {
  for (const auto& model : {ManifoldModel::flat_torus(3), ManifoldModel::round_sphere(),
                            ManifoldModel::hyperbolic_octagon()}) {
    for (const auto& fp : seeded_points(model, 5, 1)) CHECK(frame_distance(frame_flow(model, fp, 0.0), fp) < 1e-14);
  }
}

TEST_CASE("torus frame flow translates the base point") {
  const ManifoldModel t = ManifoldModel::flat_torus(3);
  const FramePoint fp = frame_from_direction(t, Eigen::Vector3d(0.1, 0.2, 0.3), Eigen::Vector3d(0.3, 0.4, 1.2));
  const FramePoint out = frame_flow(t, fp, 0.5);
  CHECK((out.frame - fp.frame).norm() == 0.0);
  const Eigen::Vector3d expected = Eigen::Vector3d(0.1, 0.2, 0.3) + 0.5 * fp.frame.col(0);
  CHECK((out.point - expected).norm() < 1e-15);
}

TEST_CASE("sphere frame flow closes after 2 pi") {
  const ManifoldModel s = ManifoldModel::round_sphere();
  for (const auto& fp : seeded_points(s, 10, 2)) {
    const FramePoint out = frame_flow(s, fp, 2 * oracle::pi);
    CHECK((out.frame - fp.frame).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((geometry::sphere_to_ambient(Eigen::Vector2d(out.point)) -
           geometry::sphere_to_ambient(Eigen::Vector2d(fp.point)))
              .norm() < 1e-9);
  }
}

TEST_CASE("right action") {
  const ManifoldModel t = ManifoldModel::flat_torus(3);
  const FramePoint fp = seeded_points(t, 1, 3).front();
  CHECK(frame_distance(right_action(fp, Eigen::Matrix2d::Identity()), fp) == 0.0);
  const FramePoint r = right_action(fp, oracle::rotation_xy(2, 0, 1, oracle::pi / 2));
  CHECK((r.frame.col(0) - fp.frame.col(0)).norm() == 0.0);
  CHECK((r.frame.col(1) - fp.frame.col(2)).norm() < 1e-15);
  CHECK((r.frame.col(2) + fp.frame.col(1)).norm() < 1e-15);
  CHECK((r.point - fp.point).norm() == 0.0);
  Eigen::Matrix2d bad;
  bad << 1, 0.1, 0, 1;
  CHECK_THROWS_AS(right_action(fp, bad), std::invalid_argument);
  CHECK_THROWS_AS(right_action(fp, Eigen::Vector2d(1, -1).asDiagonal().toDenseMatrix()), std::invalid_argument);
}

TEST_CASE("frame flow commutes with the right action") {
  for (const auto& model : {ManifoldModel::flat_torus(2), ManifoldModel::flat_torus(3), ManifoldModel::round_sphere(),
                            ManifoldModel::hyperbolic_octagon()}) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 2 * oracle::pi);
    for (const auto& fp : seeded_points(model, 100, 5)) {
      const Eigen::MatrixXd g = so_minus_one(model.dim, u(rng));
      const double t = u(rng);
      const FramePoint a = frame_flow(model, right_action(fp, g), t);
      const FramePoint b = right_action(frame_flow(model, fp, t), g);
      CHECK(frame_distance(a, b) <= 1e-9);
    }
  }
}

TEST_CASE("group law and frame invariants") {
  for (const auto& model : {ManifoldModel::flat_torus(3), ManifoldModel::round_sphere(),
                            ManifoldModel::hyperbolic_octagon()}) {
    for (const auto& fp : seeded_points(model, 20, 6)) {
      const FramePoint once = frame_flow(model, fp, 4.25);
      const FramePoint twice = frame_flow(model, frame_flow(model, fp, 1.5), 2.75);
      if (model.kind == geometry::ModelKind::FlatTorus) {
        Eigen::VectorXd d = once.point - twice.point;
        for (int i = 0; i < 3; ++i) d(i) -= 2 * oracle::pi * std::round(d(i) / (2 * oracle::pi));
        CHECK(d.norm() <= 1e-9);
      } else if (model.kind == geometry::ModelKind::RoundSphere2) {
        CHECK((geometry::sphere_to_ambient(Eigen::Vector2d(once.point)) -
               geometry::sphere_to_ambient(Eigen::Vector2d(twice.point)))
                  .norm() <= 1e-9);
      } else {
        CHECK((once.point - twice.point).norm() <= 1e-9);
      }
      CHECK((once.frame - twice.frame).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(frame_defect(model, once) <= 1e-10);
      CHECK(std::abs(frame_orientation(model, once) - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("orthonormality drift stays bounded over long runs") {
  const ManifoldModel h = ManifoldModel::hyperbolic_octagon();
  FramePoint fp = seeded_points(h, 1, 7).front();
  double worst = 0.0;
  for (int k = 0; k < 20000; ++k) {
    fp = frame_flow(h, fp, 0.01);
    worst = std::max(worst, frame_defect(h, fp));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("beta flow") {
  const ManifoldModel t = ManifoldModel::flat_torus(2);
  const FlowObservable f = scalar_observable([](const FramePoint& fp) { return cd(std::cos(fp.point(0))); });
  const auto pts = seeded_points(t, 20, 8);
  for (const auto& fp : pts) {
    CHECK(beta_flow(t, f, 0.0)(fp)(0, 0) == f(fp)(0, 0));
    for (double s : {0.3, 2.0, -5.0}) {
      const double v1 = fp.frame(0, 0);
      CHECK(std::abs(beta_flow(t, f, s)(fp)(0, 0) - std::cos(fp.point(0) - s * v1)) < 1e-12);
    }
    const FlowObservable c = constant_observable(Eigen::MatrixXcd::Constant(1, 1, cd(2.0, -1.0)));
    CHECK(beta_flow(t, c, 3.7)(fp)(0, 0) == cd(2.0, -1.0));
  }

  const ManifoldModel h = ManifoldModel::hyperbolic_octagon();
  const FlowObservable g = scalar_observable([](const FramePoint& fp) {
    return cd(fp.point(0), fp.point(1) * fp.point(1)) + fp.frame(0, 1);
  });
  const FlowObservable k = scalar_observable([](const FramePoint& fp) { return cd(std::exp(fp.point(1)), 0.5); });
  for (const auto& fp : seeded_points(h, 10, 9)) {
    const cd composed = beta_flow(h, beta_flow(h, g, 0.8), 1.1)(fp)(0, 0);
    CHECK(std::abs(composed - beta_flow(h, g, 1.9)(fp)(0, 0)) <= 1e-9);
    // *-morphism: exact by construction.
    CHECK(beta_flow(h, product(g, k), 0.6)(fp)(0, 0) == beta_flow(h, g, 0.6)(fp)(0, 0) * beta_flow(h, k, 0.6)(fp)(0, 0));
    CHECK(beta_flow(h, adjoint(g), 0.6)(fp)(0, 0) == std::conj(beta_flow(h, g, 0.6)(fp)(0, 0)));
  }
}

TEST_CASE("equivariant observables") {
  const ManifoldModel t = ManifoldModel::flat_torus(3);
  const Eigen::Vector3d v(0.2, -0.7, 0.4);
  FlowObservable f;
  f.fiber_dim = 3;
  f.evaluator = [v](const FramePoint& fp) {
    return Eigen::MatrixXcd((fp.frame.transpose() * v * v.transpose() * fp.frame).cast<cd>());
  };
  f.equivariance_rep = algebra::restrict_to_stabilizer(algebra::exterior_rep(3, 1));
  const auto pts = seeded_points(t, 10, 10);
  CHECK(equivariance_residual(f, pts) <= 1e-8);

  FlowObservable bad = constant_observable(Eigen::MatrixXcd(Eigen::Vector3d(1, 2, 3).asDiagonal().toDenseMatrix().cast<cd>()));
  bad.equivariance_rep = f.equivariance_rep;
  CHECK(equivariance_residual(bad, pts) > 0.1);
}

TEST_CASE("Liouville x Haar averages") {
  for (const auto& model : {ManifoldModel::flat_torus(2), ManifoldModel::flat_torus(3), ManifoldModel::round_sphere(),
                            ManifoldModel::hyperbolic_octagon()}) {
    const auto nodes = liouville_nodes(model, 8);
    long double total = 0.0L;
    for (const auto& n : nodes) total += n.weight;
    CHECK(std::abs(static_cast<double>(total) - 1.0) < 1e-13);
    const FlowObservable one = constant_observable(Eigen::MatrixXcd::Identity(1, 1));
    CHECK(std::abs(liouville_haar_average(model, one, 8)(0, 0) - 1.0) < 1e-13);
  }
  const FlowObservable c1 = scalar_observable([](const FramePoint& fp) { return cd(std::cos(fp.point(0))); });
  CHECK(std::abs(liouville_haar_average(ManifoldModel::flat_torus(2), c1, 8)(0, 0)) <= 1e-12);
  const FlowObservable z2 = scalar_observable([](const FramePoint& fp) { return cd(std::pow(std::cos(fp.point(0)), 2)); });
  CHECK(std::abs(liouville_haar_average(ManifoldModel::round_sphere(), z2, 8)(0, 0) - 1.0 / 3.0) <= 1e-12);
  // Direction and fiber averages: e_1 is uniform on the circle, so <e_1(x)^2> = 1/2 on T^2 and 1/3 on T^3.
  const FlowObservable e1 = scalar_observable([](const FramePoint& fp) { return cd(fp.frame(0, 0) * fp.frame(0, 0)); });
  CHECK(std::abs(liouville_haar_average(ManifoldModel::flat_torus(2), e1, 8)(0, 0) - 0.5) <= 1e-12);
  CHECK(std::abs(liouville_haar_average(ManifoldModel::flat_torus(3), e1, 8)(0, 0) - 1.0 / 3.0) <= 1e-12);
  const FlowObservable e2 = scalar_observable([](const FramePoint& fp) { return cd(fp.frame(2, 1) * fp.frame(2, 1)); });
  CHECK(std::abs(liouville_haar_average(ManifoldModel::flat_torus(3), e2, 8)(0, 0) - 1.0 / 3.0) <= 1e-12);
  // Octagon: resolution convergence of a smooth radial bump.
  const ManifoldModel h = ManifoldModel::hyperbolic_octagon();
  const FlowObservable bump = scalar_observable([](const FramePoint& fp) {
    const double r = octagon_center_distance(fp.point);
    return cd(std::exp(-r * r));
  });
  CHECK(std::abs(liouville_haar_average(h, bump, 16)(0, 0) - liouville_haar_average(h, bump, 24)(0, 0)) < 1e-9);
}

TEST_CASE("Birkhoff averages") {
  const ManifoldModel t = ManifoldModel::flat_torus(2);
  const FlowObservable c = constant_observable(Eigen::MatrixXcd::Constant(1, 1, cd(0.25, 0.5)));
  const FramePoint fp = frame_from_direction(t, Eigen::Vector2d(0.3, 0.0), Eigen::Vector2d(1.0, 0.0));
  const BirkhoffEstimate ec = birkhoff_average(t, c, fp, 10.0, 0.01, 8);
  CHECK(ec.time_average(0, 0) == cd(0.25, 0.5));

  // Rational direction (1, 0) from x_2 = 0: cos(x_2) stays 1.
  const FlowObservable cos2 = scalar_observable([](const FramePoint& p) { return cd(std::cos(p.point(1))); });
  const BirkhoffEstimate rational = birkhoff_average(t, cos2, fp, 100.0, 0.01, 8);
  CHECK(std::abs(rational.time_average(0, 0) - 1.0) < 1e-12);
  CHECK(rational.gap() > 0.1);

  // Irrational direction: the line average of cos(x_1) is O(1/T).
  const FlowObservable cos1 = scalar_observable([](const FramePoint& p) { return cd(std::cos(p.point(0))); });
  const FramePoint irr = frame_from_direction(t, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, std::sqrt(2.0) - 1.0));
  const BirkhoffEstimate e = birkhoff_average(t, cos1, irr, 1000.0, 0.01, 8);
  CHECK(e.gap() < 5e-3);
  // Closed form: (1/T) int_0^T cos(v_1 s) ds = sin(v_1 T)/(v_1 T).
  const double v1 = irr.frame(0, 0);
  CHECK(std::abs(e.time_average(0, 0).real() - std::sin(v1 * 1000.0) / (v1 * 1000.0)) < 1e-4);

  CHECK_THROWS_AS(birkhoff_average(t, c, fp, 0.001, 0.01, 8), std::invalid_argument);
}

TEST_CASE("ensembles are reproducible") {
  const ManifoldModel h = ManifoldModel::hyperbolic_octagon();
  const FlowObservable f = scalar_observable([](const FramePoint& fp) { return cd(fp.point(0)); });
  const auto starts = seeded_points(h, 4, 11);
  const BirkhoffEstimate a = birkhoff_ensemble(h, f, starts, 20.0, 0.01, 8);
  const BirkhoffEstimate b = birkhoff_ensemble(h, f, starts, 20.0, 0.01, 8);
  CHECK(a.time_average(0, 0) == b.time_average(0, 0));
  REQUIRE(a.per_trajectory.size() == 4);
  cd mean = 0.0;
  for (const auto& m : a.per_trajectory) mean += m(0, 0);
  CHECK(std::abs(mean / 4.0 - a.time_average(0, 0)) < 1e-15);
}

TEST_CASE("random frame points are valid") {
  for (const auto& model : {ManifoldModel::flat_torus(3), ManifoldModel::round_sphere(),
                            ManifoldModel::hyperbolic_octagon()}) {
    for (const auto& fp : seeded_points(model, 50, 12)) {
      CHECK(geometry::in_domain(model, fp.point));
      CHECK(frame_defect(model, fp) <= 1e-12);
      CHECK(std::abs(frame_orientation(model, fp) - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("trajectory export") {
  const ManifoldModel t = ManifoldModel::flat_torus(2);
  const FlowObservable f = scalar_observable([](const FramePoint& fp) { return cd(std::cos(fp.point(0))); });
  const FramePoint fp = frame_from_direction(t, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(1.0, 0.0));
  const auto rows = sample_trajectory(t, f, fp, 1.0, 0.25);
  CHECK(rows.size() >= 4);
  std::ostringstream out;
  write_trajectory_csv(out, rows);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x1,x2,e11,e12,e21,e22,value_re,value_im");
  CHECK(std::abs(rows[1].value.real() - std::cos(0.25)) < 1e-14);
}
