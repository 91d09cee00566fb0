#include "experiments.hpp"

#include "helab/algebra.hpp"
#include "helab/flows.hpp"
#include "helab/geometry.hpp"
#include "helab/limits.hpp"
#include "helab/linalg.hpp"
#include "helab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace helab::cli::detail {

namespace {

using json = nlohmann::json;
using cd = std::complex<double>;
using geometry::ManifoldModel;
using spectral::OperatorMatrix;
using spectral::SparseC;
using spectral::SymbolField;

constexpr double kPi = std::numbers::pi;

ManifoldModel make_model(const std::string& name) {
  if (name == "torus2") return ManifoldModel::flat_torus(2);
  if (name == "torus3") return ManifoldModel::flat_torus(3);
  if (name == "sphere") return ManifoldModel::round_sphere();
  return ManifoldModel::hyperbolic_octagon();
}

json complex_json(cd z) { return json::array({z.real(), z.imag()}); }

double max_ratio(const std::vector<double>& v) {
  double r = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) r = std::max(r, v[i] / v[i - 1]);
  return r;
}

// Gaps at or below this floor count as converged when forming ratios.
constexpr double kGapFloor = 1e-13;

double ratio_with_floor(const std::vector<double>& gaps) {
  double r = 0.0;
  for (std::size_t i = 1; i < gaps.size(); ++i) {
    if (gaps[i - 1] <= kGapFloor && gaps[i] <= kGapFloor) continue;
    r = std::max(r, gaps[i] / gaps[i - 1]);
  }
  return r;
}

OperatorMatrix wrap(SparseC m, std::string label, int order = 0) {
  OperatorMatrix op;
  op.matrix = std::move(m);
  op.order = order;
  op.label = std::move(label);
  return op;
}

Eigen::MatrixXcd seeded_hermitian(int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) m(i, j) = cd(g(rng), g(rng));
  }
  return 0.5 * (m + m.adjoint());
}

// --- flow -----------------------------------------------------------------------------

flows::FlowObservable flow_observable(const ManifoldModel& model, const std::string& name) {
  if (name == "bump") {
    return flows::scalar_observable([](const flows::FramePoint& fp) -> cd {
      const double r = flows::octagon_center_distance(fp.point);
      return std::exp(-r * r);
    });
  }
  if (name == "z2") {
    return flows::scalar_observable([](const flows::FramePoint& fp) -> cd {
      const double z = std::cos(fp.point(0));
      return z * z;
    });
  }
  const int axis = name == "cos_x1" ? 0 : 1;
  const double period = model.periods.at(axis);
  return flows::scalar_observable([axis, period](const flows::FramePoint& fp) -> cd {
    return std::cos(2.0 * kPi * fp.point(axis) / period);
  });
}

// Componentwise chart distance, periodic coordinates wrapped.
double chart_distance(const ManifoldModel& model, const flows::FramePoint& a, const flows::FramePoint& b) {
  Eigen::VectorXd d = a.point - b.point;
  auto wrap_coord = [&](int i, double period) { d(i) -= period * std::round(d(i) / period); };
  if (model.kind == geometry::ModelKind::FlatTorus) {
    for (int i = 0; i < model.dim; ++i) wrap_coord(i, model.periods[i]);
  } else if (model.kind == geometry::ModelKind::RoundSphere2) {
    wrap_coord(1, 2.0 * kPi);
  }
  return std::max(d.cwiseAbs().maxCoeff(), (a.frame - b.frame).cwiseAbs().maxCoeff());
}

Eigen::MatrixXd stabilizer_element(int n, double angle) {
  if (n == 2) return Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n - 1, n - 1);
  g(0, 0) = std::cos(angle);
  g(0, 1) = -std::sin(angle);
  g(1, 0) = std::sin(angle);
  g(1, 1) = std::cos(angle);
  return g;
}

}  // namespace

void run_flow(Context& ctx) {
  const Params& p = ctx.params;
  const ManifoldModel model = make_model(p.str("model"));
  const flows::FlowObservable f = flow_observable(model, p.str("observable"));
  const double horizon = p.real("T");
  const double dt = p.real("dt");
  const int count = p.integer("trajectories");
  const int resolution = p.integer("resolution");
  const std::string direction = p.str("direction");
  const int n = model.dim;

  std::mt19937_64 rng(p.seed());
  std::vector<flows::FramePoint> starts;
  for (int i = 0; i < count; ++i) {
    if (direction == "random") {
      starts.push_back(flows::random_frame_point(model, rng));
      continue;
    }
    // Tori only: x_1 uniform, remaining coordinates 0.
    std::uniform_real_distribution<double> u(0.0, model.periods[0]);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x(0) = u(rng);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v(0) = 1.0;
    if (direction == "irrational") {
      v(1) = std::numbers::phi - 1.0;
      if (n > 2) v(2) = std::numbers::sqrt2 - 1.0;
    }
    starts.push_back(flows::frame_from_direction(model, x, v));
  }

  const flows::BirkhoffEstimate est = flows::birkhoff_ensemble(model, f, starts, horizon, dt, resolution);
  const cd space = est.space_average(0, 0);

  std::ostringstream csv;
  csv << "trajectory,time_average_re,time_average_im,space_average_re,space_average_im,gap\n";
  json per = json::array();
  for (int i = 0; i < count; ++i) {
    const cd ta = est.per_trajectory[i](0, 0);
    csv << i << "," << num(ta.real()) << "," << num(ta.imag()) << "," << num(space.real()) << ","
        << num(space.imag()) << "," << num(std::abs(ta - space)) << "\n";
    per.push_back(std::abs(ta - space));
  }
  const cd mean = est.time_average(0, 0);
  csv << "mean," << num(mean.real()) << "," << num(mean.imag()) << "," << num(space.real()) << ","
      << num(space.imag()) << "," << num(est.gap()) << "\n";
  ctx.write("birkhoff.csv", csv.str());

  // Strided samples of the first trajectory, tracking the frame defect.
  const long long steps = std::llround(horizon / dt);
  const long long stride = p.integer("stride");
  std::vector<flows::TrajectoryRow> rows;
  flows::FramePoint fp = starts.front();
  double defect = flows::frame_defect(model, fp);
  double orientation = std::abs(flows::frame_orientation(model, fp) - 1.0);
  for (long long k = 0; k <= steps; ++k) {
    if (k % stride == 0) {
      const Eigen::MatrixXcd value = f(fp);
      rows.push_back({static_cast<double>(k) * dt, fp, value.trace() / static_cast<double>(f.fiber_dim)});
    }
    if (k == steps) break;
    fp = flows::frame_flow(model, fp, dt);
    defect = std::max(defect, flows::frame_defect(model, fp));
    orientation = std::max(orientation, std::abs(flows::frame_orientation(model, fp) - 1.0));
  }
  std::ostringstream traj;
  flows::write_trajectory_csv(traj, rows);
  ctx.write("trajectory.csv", traj.str());

  // Flow group law and commutation with the right SO(n-1) action on seeded points.
  std::mt19937_64 check_rng(p.seed() + 1);
  double group_law = 0.0;
  double equivariance = 0.0;
  const Eigen::MatrixXd g = stabilizer_element(n, 0.9);
  for (int i = 0; i < 16; ++i) {
    const flows::FramePoint x = flows::random_frame_point(model, check_rng);
    const flows::FramePoint once = flows::frame_flow(model, x, 0.7 + 1.9);
    const flows::FramePoint twice = flows::frame_flow(model, flows::frame_flow(model, x, 0.7), 1.9);
    group_law = std::max(group_law, chart_distance(model, once, twice));
    const flows::FramePoint lhs = flows::frame_flow(model, flows::right_action(x, g), 1.3);
    const flows::FramePoint rhs = flows::right_action(flows::frame_flow(model, x, 1.3), g);
    equivariance = std::max(equivariance, chart_distance(model, lhs, rhs));
  }

  json report;
  report["model"] = model.name();
  report["observable"] = p.str("observable");
  report["direction"] = direction;
  report["horizon"] = horizon;
  report["dt"] = dt;
  report["trajectories"] = count;
  report["liouville_resolution"] = resolution;
  report["time_average"] = complex_json(mean);
  report["space_average"] = complex_json(space);
  report["gap"] = est.gap();
  report["per_trajectory_gap"] = per;
  report["frame_defect_max"] = defect;
  report["orientation_defect_max"] = orientation;
  report["group_law_residual"] = group_law;
  report["right_action_residual"] = equivariance;
  ctx.write_json("report.json", report);

  ctx.at_most("frame_defect_max", defect, p.real("drift_tol"));
  ctx.at_most("orientation_defect_max", orientation, 1e-10);
  ctx.at_most("group_law_residual", group_law, 1e-9);
  ctx.at_most("right_action_residual", equivariance, 1e-9);
  if (p.has("gap_max")) ctx.at_most("birkhoff_gap", est.gap(), p.real("gap_max"));
  if (p.has("gap_min")) ctx.at_least("birkhoff_gap", est.gap(), p.real("gap_min"));
}

// --- holonomy ---------------------------------------------------------------------------

void run_holonomy(Context& ctx) {
  const Params& p = ctx.params;
  const std::string name = p.str("model");
  const ManifoldModel model = make_model(name);
  const double curvature = model.curvature;
  std::mt19937_64 rng(p.seed());
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto orient = [&](std::vector<Eigen::VectorXd>& v) {
    double s = 0.0;
    if (name == "sphere") {
      s = Eigen::Vector3d(v[0]).dot(Eigen::Vector3d(v[1]).cross(Eigen::Vector3d(v[2])));
    } else {
      const Eigen::Vector2d a = v[1] - v[0];
      const Eigen::Vector2d b = v[2] - v[0];
      s = a(0) * b(1) - a(1) * b(0);
    }
    if (s < 0.0) std::swap(v[1], v[2]);
  };
  auto random_triangle = [&]() {
    std::vector<Eigen::VectorXd> v(3);
    if (name == "sphere") {
      const Eigen::Vector3d c = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng)).normalized();
      for (auto& x : v) x = (c + 0.6 * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng))).normalized();
    } else if (name == "octagon") {
      // Inside the disk of Euclidean radius 0.45, a convex subset of the fundamental domain.
      for (auto& x : v) {
        const double r = 0.45 * std::sqrt(unit(rng));
        const double a = 2.0 * kPi * unit(rng);
        x = Eigen::Vector2d(r * std::cos(a), r * std::sin(a));
      }
    } else {
      for (auto& x : v) x = Eigen::Vector2d(0.2 + 2.8 * unit(rng), 0.2 + 2.8 * unit(rng));
    }
    orient(v);
    return v;
  };

  std::vector<Eigen::VectorXd> fixed;
  if (name == "sphere") {
    fixed = {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0)};
  } else if (name == "octagon") {
    fixed = {Eigen::Vector2d(0, 0), Eigen::Vector2d(0.4, 0), Eigen::Vector2d(0, 0.4)};
  } else {
    fixed = {Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(2.0, 0.5), Eigen::Vector2d(0.5, 2.0)};
  }

  std::ostringstream csv;
  csv << "index,kind,area,holonomy,curvature_times_area,residual\n";
  double worst = 0.0;
  const int count = p.integer("triangles");
  for (int i = 0; i <= count; ++i) {
    std::vector<Eigen::VectorXd> tri = i == 0 ? fixed : random_triangle();
    double area = geometry::geodesic_polygon_area(model, tri);
    while (i > 0 && area < 1e-4) {
      tri = random_triangle();
      area = geometry::geodesic_polygon_area(model, tri);
    }
    const double hol = geometry::holonomy(model, tri);
    const double residual = std::abs(std::remainder(hol - curvature * area, 2.0 * kPi));
    worst = std::max(worst, residual);
    csv << i << "," << (i == 0 ? "fixed" : "random") << "," << num(area) << "," << num(hol) << ","
        << num(curvature * area) << "," << num(residual) << "\n";
  }
  ctx.write("holonomy.csv", csv.str());
  ctx.at_most("holonomy_minus_curvature_area", worst, p.real("tolerance"));
}

// --- branching ----------------------------------------------------------------------------

void run_branching(Context& ctx) {
  const int n = ctx.params.integer("n");
  const int p = ctx.params.integer("p");
  const algebra::BranchingReport rep = algebra::branching(n, p);

  double idempotence = 0.0;
  double orthogonality = 0.0;
  json components = json::array();
  for (std::size_t i = 0; i < rep.projections.size(); ++i) {
    const Eigen::MatrixXcd& pi = rep.projections[i].projector;
    idempotence = std::max(idempotence, (pi * pi - pi).norm());
    for (std::size_t j = i + 1; j < rep.projections.size(); ++j) {
      orthogonality = std::max(orthogonality, (pi * rep.projections[j].projector).norm());
    }
    json c;
    c["rank"] = rep.ranks[i];
    c["group"] = rep.group_of_component[i] == 0 ? "Lambda^p C^(n-1)" : "Lambda^(p-1) C^(n-1)";
    components.push_back(c);
  }
  const int expected_upper = algebra::binomial(n - 1, p);
  const int expected_lower = algebra::binomial(n - 1, p - 1);

  json j;
  j["n"] = n;
  j["p"] = p;
  j["dimension"] = algebra::binomial(n, p);
  j["ranks"] = rep.ranks;
  j["components"] = components;
  j["rank_upper"] = rep.rank_upper;
  j["rank_lower"] = rep.rank_lower;
  j["expected_rank_upper"] = expected_upper;
  j["expected_rank_lower"] = expected_lower;
  j["split_matches"] = rep.split_matches;
  j["identity_residual"] = rep.identity_residual;
  j["commutant_residual"] = rep.commutant_residual;
  j["character_residual"] = rep.character_residual;
  j["idempotence_residual"] = idempotence;
  j["orthogonality_residual"] = orthogonality;
  ctx.write_json("branching.json", j);

  ctx.at_most("sum_projections_minus_identity", rep.identity_residual, 1e-10);
  ctx.at_most("commutant_residual", rep.commutant_residual, 1e-8);
  ctx.at_most("idempotence_residual", idempotence, 1e-10);
  ctx.at_most("orthogonality_residual", orthogonality, 1e-10);
  ctx.at_most("character_residual", rep.character_residual, 1e-8);
  ctx.equals("rank_mismatch", std::abs(rep.rank_upper - expected_upper) + std::abs(rep.rank_lower - expected_lower),
             0.0);
}

// --- spectrum -------------------------------------------------------------------------------

namespace {

double norm_of(const SparseC& a) { return a.nonZeros() == 0 ? 0.0 : linalg::norm2(a); }

double eigenvalue_oracle_residual(const spectral::SpectralModel& sm) {
  double r = 0.0;
  for (Eigen::Index j = 0; j < sm.dim(); ++j) {
    const auto& mode = sm.basis[j].mode;
    double expected = 0.0;
    if (sm.model.kind == geometry::ModelKind::RoundSphere2) {
      expected = mode[0] * (mode[0] + 1.0);
    } else {
      for (std::size_t i = 0; i < mode.size(); ++i) {
        const double kappa = 2.0 * kPi * mode[i] / sm.model.periods[i];
        expected += kappa * kappa;
      }
    }
    r = std::max(r, std::abs(sm.eigenvalues[j] - expected));
  }
  return r;
}

void forms_checks(Context& ctx, const ManifoldModel& model, int p, int cutoff, json& report) {
  const double tol = ctx.params.real("tolerance");
  const int n = model.dim;
  const auto [sm, lap] = spectral::build_laplacian(model, spectral::Bundle::forms(p), cutoff);
  const Eigen::Index dim = sm.dim();

  if (p + 2 <= n) {
    const SparseC dd = spectral::exterior_d(model, p + 1, cutoff).matrix * spectral::exterior_d(model, p, cutoff).matrix;
    const double r = norm_of(dd);
    report["d_squared"] = r;
    ctx.at_most("d_squared", r, tol);
  }
  SparseC hodge_lap(dim, dim);
  if (p > 0) {
    hodge_lap += spectral::exterior_d(model, p - 1, cutoff).matrix * spectral::codifferential(model, p, cutoff).matrix;
  }
  if (p < n) {
    hodge_lap += spectral::codifferential(model, p + 1, cutoff).matrix * spectral::exterior_d(model, p, cutoff).matrix;
  }
  const double lap_res = norm_of(SparseC(hodge_lap - lap.matrix));
  report["laplacian_minus_d_delta_plus_delta_d"] = lap_res;
  ctx.at_most("laplacian_minus_d_delta_plus_delta_d", lap_res / std::max(1.0, sm.eigenvalues.back()), tol);

  const spectral::HodgeProjections h = spectral::hodge_projections(model, p, cutoff);
  const SparseC id = linalg::identity(dim);
  const double sum = norm_of(SparseC(h.P.matrix + h.Q.matrix + h.H.matrix - id));
  const double p2 = norm_of(SparseC(h.P.matrix * h.P.matrix - h.P.matrix));
  const double q2 = norm_of(SparseC(h.Q.matrix * h.Q.matrix - h.Q.matrix));
  const double pq = norm_of(SparseC(h.P.matrix * h.Q.matrix));
  const double comm = norm_of(SparseC(h.P.matrix * lap.matrix - lap.matrix * h.P.matrix));
  report["P_plus_Q_plus_H_minus_I"] = sum;
  report["P_squared_minus_P"] = p2;
  report["Q_squared_minus_Q"] = q2;
  report["PQ"] = pq;
  report["P_Laplacian_commutator"] = comm;
  ctx.at_most("P_plus_Q_plus_H_minus_I", sum, tol);
  ctx.at_most("P_squared_minus_P", p2, tol);
  ctx.at_most("Q_squared_minus_Q", q2, tol);
  ctx.at_most("PQ", pq, tol);
  ctx.at_most("P_Laplacian_commutator", comm / std::max(1.0, sm.eigenvalues.back()), tol);

  if (model.kind == geometry::ModelKind::FlatTorus && n == 3 && p == 1) {
    const OperatorMatrix r = spectral::helicity_R(model, cutoff);
    const double r2 = norm_of(SparseC(r.matrix * r.matrix * h.P.matrix - h.P.matrix));
    const SparseC rp = r.matrix * h.P.matrix;
    double eig = 0.0;
    for (double e : linalg::hermitian_eigenvalues(rp)) {
      eig = std::max(eig, std::min({std::abs(e - 1.0), std::abs(e), std::abs(e + 1.0)}));
    }
    const limits::TracialState omega = limits::tracial_state(model, 3, 4);
    const double tracial = std::abs(limits::evaluate(omega, *r.symbol).value);
    report["helicity_R_squared_on_range_P"] = r2;
    report["helicity_eigenvalue_defect"] = eig;
    report["helicity_tracial_value"] = tracial;
    ctx.at_most("helicity_R_squared_minus_I_on_range_P", r2, tol);
    ctx.at_most("helicity_eigenvalue_defect", eig, 1e-12);
    ctx.at_most("helicity_tracial_value", tracial, 1e-10);
  }
}

void dirac_checks(Context& ctx, const ManifoldModel& model, const spectral::SpectralModel& sm,
                  const OperatorMatrix& dirac, json& report) {
  const double tol = ctx.params.real("tolerance");
  const spectral::SignDecomposition s = spectral::sign_and_halves(dirac);
  const algebra::CliffordModel cl = algebra::build_clifford(model.dim);
  const int m = cl.module_dim();

  double block = 0.0;
  std::map<double, std::pair<double, double>> shell_traces;
  const auto blocks = sm.degeneracy_blocks();
  for (Eigen::Index j = 0; j < sm.dim(); ++j) {
    const auto& lab = sm.basis[j];
    if (lab.component != 0) continue;
    Eigen::VectorXd kappa(model.dim);
    for (int i = 0; i < model.dim; ++i) kappa(i) = 2.0 * kPi * lab.mode[i] / model.periods[i];
    if (kappa.norm() == 0.0) continue;
    std::vector<Eigen::Index> idx;
    for (int a = 0; a < m; ++a) idx.push_back(sm.index_of({lab.mode, 0, a}));
    const Eigen::MatrixXcd got = linalg::extract(s.sign.matrix, idx, idx);
    block = std::max(block, (got - algebra::clifford_mult(cl, kappa / kappa.norm())).cwiseAbs().maxCoeff());
  }
  for (const auto& [begin, end] : blocks) {
    if (sm.eigenvalues[begin] == 0.0) continue;
    std::pair<double, double> tr{0.0, 0.0};
    for (Eigen::Index j = begin; j < end; ++j) {
      tr.first += s.plus.matrix.coeff(j, j).real();
      tr.second += s.minus.matrix.coeff(j, j).real();
    }
    shell_traces[sm.eigenvalues[begin]] = tr;
  }
  double balance = 0.0;
  for (const auto& [lambda, tr] : shell_traces) balance = std::max(balance, std::abs(tr.first - tr.second));

  const SparseC id = linalg::identity(sm.dim());
  const double sign2 = norm_of(SparseC(s.sign.matrix * s.sign.matrix - (id - s.kernel.matrix)));
  const double plus_comm = norm_of(SparseC(s.plus.matrix * s.abs.matrix - s.abs.matrix * s.plus.matrix));
  const double minus_comm = norm_of(SparseC(s.minus.matrix * s.abs.matrix - s.abs.matrix * s.minus.matrix));
  const double halves = norm_of(SparseC(s.plus.matrix + s.minus.matrix + s.kernel.matrix - id));
  const double d2 = norm_of(SparseC(dirac.matrix * dirac.matrix - linalg::diagonal(sm.eigenvalues)));

  report["sign_block_minus_clifford"] = block;
  report["sign_squared_minus_I_minus_kernel"] = sign2;
  report["plus_abs_commutator"] = plus_comm;
  report["minus_abs_commutator"] = minus_comm;
  report["plus_minus_kernel_sum_minus_I"] = halves;
  report["trace_balance_per_shell"] = balance;
  report["dirac_squared_minus_laplacian"] = d2;
  report["kernel_dimension"] = s.kernel_dim;
  ctx.at_most("sign_block_minus_clifford", block, 1e-12);
  ctx.at_most("sign_squared_minus_I_minus_kernel", sign2, tol);
  ctx.at_most("plus_abs_commutator", plus_comm, 1e-12);
  ctx.at_most("minus_abs_commutator", minus_comm, 1e-12);
  ctx.at_most("plus_minus_kernel_sum_minus_I", halves, tol);
  ctx.at_most("trace_balance_per_shell", balance, 1e-10);
  ctx.at_most("dirac_squared_minus_laplacian", d2 / std::max(1.0, sm.eigenvalues.back()), tol);
}

}  // namespace

void run_spectrum(Context& ctx) {
  const Params& p = ctx.params;
  const ManifoldModel model = make_model(p.str("model"));
  const std::string bundle_name = p.str("bundle");
  const int cutoff = p.integer("K");
  const int degree = p.integer("p");
  json report;
  report["model"] = model.name();
  report["cutoff"] = cutoff;

  spectral::SpectralModel sm;
  OperatorMatrix op;
  if (bundle_name == "spinors") {
    std::tie(sm, op) = spectral::build_dirac(model, cutoff);
    dirac_checks(ctx, model, sm, op, report);
  } else {
    const spectral::Bundle bundle =
        bundle_name == "forms" ? spectral::Bundle::forms(degree) : spectral::Bundle::functions();
    std::tie(sm, op) = spectral::build_laplacian(model, bundle, cutoff, p.real("V"), p.real("mass"));
    const double oracle = eigenvalue_oracle_residual(sm);
    report["eigenvalue_oracle_residual"] = oracle;
    ctx.at_most("eigenvalue_oracle_residual", oracle, 1e-9);
    if (bundle_name == "forms") forms_checks(ctx, model, degree, cutoff, report);
  }
  const double herm = linalg::hermitian_defect(op.matrix);
  ctx.at_most("operator_hermitian_defect", herm, p.real("tolerance"));

  report["bundle"] = sm.bundle.name();
  report["dimension"] = sm.dim();
  report["hermitian_defect"] = herm;

  std::ostringstream spectrum;
  spectral::write_spectrum_csv(spectrum, sm);
  ctx.write("spectrum.csv", spectrum.str());
  std::ostringstream ops;
  spectral::write_operator_csv(ops, op);
  ctx.write("operator.csv", ops.str());

  json meta;
  meta["label"] = op.label;
  meta["rows"] = op.matrix.rows();
  meta["cols"] = op.matrix.cols();
  meta["nonzeros"] = op.matrix.nonZeros();
  meta["order"] = op.order;
  meta["self_adjoint"] = op.self_adjoint;
  meta["potential"] = p.real("V");
  meta["mass"] = p.real("mass");
  meta["eigenvalue_min"] = sm.eigenvalues.front();
  meta["eigenvalue_max"] = sm.eigenvalues.back();
  meta["checks"] = report;
  ctx.write_json("operator.json", meta);
}

// --- states ---------------------------------------------------------------------------------

void run_states(Context& ctx) {
  const Params& p = ctx.params;
  const std::string model_name = p.str("model");
  const std::string obs = p.str("observable");
  const ManifoldModel model = make_model(model_name);
  const std::vector<int> ladder = p.integers("ladder");
  const std::vector<double> t_ladder = p.reals("t_ladder");
  const bool sphere = model_name == "sphere";

  SymbolField sigma;
  std::optional<spectral::TorusSymbol> torus_symbol;
  if (sphere) {
    sigma = SymbolField{[](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
                          const double z = std::cos(x(0));
                          return Eigen::MatrixXcd::Constant(1, 1, cd(z * z));
                        },
                        1};
  } else {
    torus_symbol = obs == "cos_x1" ? spectral::TorusSymbol::cos_x(2, 0, 1)
                                   : spectral::TorusSymbol::direction(
                                         2, [](const Eigen::VectorXd& w) { return cd(w(0) * w(0)); },
                                         "xi_1^2/|xi|^2");
    sigma = torus_symbol->field();
  }
  const limits::TracialState omega = limits::tracial_state(model, 1, p.integer("resolution"));
  const limits::StateValue tracial = limits::evaluate(omega, sigma);

  std::ostringstream csv;
  csv << "cutoff,kind,parameter,value_re,value_im,gap,reliable\n";
  auto row = [&](int cutoff, const std::string& kind, const limits::LadderRow& r) {
    csv << cutoff << "," << kind << "," << num(r.parameter) << "," << num(r.value.real()) << ","
        << num(r.value.imag()) << "," << num(r.gap) << "," << (r.reliable ? 1 : 0) << "\n";
  };

  std::vector<double> cesaro_gaps;
  std::vector<double> truncated_gaps;
  double heat_vs_cesaro = 0.0;
  int reliable_heat = 0;
  json ladder_json = json::array();
  for (int cutoff : ladder) {
    const auto [sm, lap] = spectral::build_laplacian(model, spectral::Bundle::functions(), cutoff);
    const OperatorMatrix a = sphere ? spectral::sphere_multiplication(sm, 2) : spectral::quantize(sm, *torus_symbol);
    const limits::StateComparison cmp = limits::compare_states(sm, a, tracial.value, {sm.dim()}, t_ladder);
    const limits::LadderRow& ces = cmp.cesaro.front();
    row(cutoff, "cesaro", ces);
    cesaro_gaps.push_back(ces.gap);
    json entry;
    entry["cutoff"] = cutoff;
    entry["dimension"] = sm.dim();
    entry["cesaro"] = complex_json(ces.value);
    entry["cesaro_gap"] = ces.gap;
    for (const auto& h : cmp.heat) {
      row(cutoff, "heat", h);
      if (h.reliable) {
        ++reliable_heat;
        heat_vs_cesaro = std::max(heat_vs_cesaro, std::abs(h.value - ces.value));
      }
    }
    entry["heat_t_min"] = spectral::heat_state_trace(a, lap, t_ladder.front()).t_min;
    if (sphere) {
      // (Pi z Pi)^2 differs from Pi z^2 Pi by the coupling to l = L + 1.
      const OperatorMatrix z = spectral::sphere_multiplication(sm, 1);
      const OperatorMatrix zz = wrap(SparseC(z.matrix * z.matrix), "(Pi z Pi)^2");
      const limits::StateComparison tp = limits::compare_states(sm, zz, tracial.value, {sm.dim()}, {});
      row(cutoff, "cesaro_truncated_product", tp.cesaro.front());
      truncated_gaps.push_back(tp.cesaro.front().gap);
      entry["truncated_product_gap"] = tp.cesaro.front().gap;
    }
    ladder_json.push_back(entry);
  }
  ctx.write("states.csv", csv.str());

  json report;
  report["model"] = model.name();
  report["observable"] = obs;
  report["tracial_value"] = complex_json(tracial.value);
  report["tracial_error_estimate"] = tracial.error_estimate;
  report["ladder"] = ladder_json;
  report["gap_floor"] = kGapFloor;
  ctx.write_json("report.json", report);

  const double gap_max = p.real("gap_max");
  const double ratio_max = p.real("ratio_max");
  ctx.at_most("tracial_quadrature_error", tracial.error_estimate, 1e-8);
  ctx.at_most("cesaro_gap_at_largest_cutoff", cesaro_gaps.back(), gap_max);
  if (cesaro_gaps.size() > 1) ctx.at_most("cesaro_gap_ratio", ratio_with_floor(cesaro_gaps), ratio_max);
  if (sphere) {
    ctx.at_most("truncated_product_gap_at_largest_cutoff", truncated_gaps.back(), gap_max);
    if (truncated_gaps.size() > 1) ctx.at_most("truncated_product_gap_ratio", max_ratio(truncated_gaps), ratio_max);
  }
  ctx.at_least("reliable_heat_rows", reliable_heat, 1);
  ctx.at_most("heat_minus_cesaro", heat_vs_cesaro, p.real("heat_tol"));
}

// --- egorov ---------------------------------------------------------------------------------

void run_egorov(Context& ctx) {
  const Params& p = ctx.params;
  const ManifoldModel model = ManifoldModel::flat_torus(2);
  const int cutoff = p.integer("K");
  const double t = p.real("t");
  const auto [sm, lap] = spectral::build_laplacian(model, spectral::Bundle::functions(), cutoff);
  const spectral::TorusSymbol a = spectral::TorusSymbol::cos_x(2, 0, 1);
  const double lo = p.real("ratio_min");
  const double hi = p.real("ratio_max");

  const std::vector<double> shells = p.reals("shells");
  std::vector<double> residuals;
  std::ostringstream csv;
  csv << "shell,count,residual,ratio\n";
  for (std::size_t i = 0; i < shells.size(); ++i) {
    residuals.push_back(limits::egorov_residual(sm, a, t, shells[i]));
    csv << num(shells[i]) << "," << limits::frequency_shell(sm, shells[i]).size() << "," << num(residuals[i]) << ","
        << (i == 0 ? std::string() : num(residuals[i] / residuals[i - 1])) << "\n";
  }
  ctx.write("egorov.csv", csv.str());

  const OperatorMatrix op = spectral::quantize(sm, a);
  const SparseC inv_sqrt = linalg::hermitian_function(lap.matrix, [](double x) { return 1.0 / std::sqrt(x + 1.0); });
  const OperatorMatrix b = wrap(SparseC(op.matrix * inv_sqrt), "Op(cos x1)(Delta+1)^(-1/2)", -1);
  const limits::DecayTable decay = limits::negative_order_decay(sm, b, p.reals("decay_shells"));
  std::ostringstream dcsv;
  dcsv << "shell,count,diagonal_max,compressed_norm,norm_ratio\n";
  for (std::size_t i = 0; i < decay.rows.size(); ++i) {
    const auto& r = decay.rows[i];
    dcsv << num(r.shell) << "," << r.count << "," << num(r.diagonal_max) << "," << num(r.compressed_norm) << ","
         << (i == 0 ? std::string() : num(decay.norm_ratios[i - 1])) << "\n";
  }
  ctx.write("decay.csv", dcsv.str());

  for (std::size_t i = 1; i < residuals.size(); ++i) {
    ctx.within("egorov_ratio_" + num(shells[i - 1]) + "_to_" + num(shells[i]), residuals[i] / residuals[i - 1], lo, hi);
  }
  ctx.equals("egorov_residual_at_t0", limits::egorov_residual(sm, a, 0.0, shells.front()), 0.0);
  for (std::size_t i = 0; i < decay.norm_ratios.size(); ++i) {
    ctx.within("decay_ratio_" + num(decay.rows[i].shell) + "_to_" + num(decay.rows[i + 1].shell),
               decay.norm_ratios[i], lo, hi);
  }
}

// --- variance -------------------------------------------------------------------------------

namespace {

void variance_rows(std::ostringstream& csv, const limits::VarianceReport& r) {
  for (std::size_t j = 0; j < r.values.size(); ++j) {
    csv << r.label << "," << j << "," << num(r.values[j].real()) << "," << num(r.values[j].imag()) << ","
        << num(r.deviations[j].real()) << "," << num(r.deviations[j].imag()) << "\n";
  }
}

json variance_json(const limits::VarianceReport& r) {
  json j;
  j["label"] = r.label;
  j["n"] = r.n;
  j["limit_value"] = complex_json(r.limit_value);
  j["variance"] = r.variance;
  return j;
}

Eigen::Index rank_of(const OperatorMatrix& projection) {
  double tr = 0.0;
  for (Eigen::Index j = 0; j < projection.matrix.rows(); ++j) tr += projection.matrix.coeff(j, j).real();
  return static_cast<Eigen::Index>(std::llround(tr));
}

}  // namespace

void run_variance(Context& ctx) {
  const Params& p = ctx.params;
  const int cutoff = p.integer("K");
  const Eigen::Index requested = p.integer("N");
  std::ostringstream csv;
  csv << "subspace,j,value_re,value_im,deviation_re,deviation_im\n";
  json report;
  report["case"] = p.str("case");
  report["cutoff"] = cutoff;

  if (p.str("case") == "helicity") {
    const ManifoldModel model = ManifoldModel::flat_torus(3);
    const auto [sm, lap] = spectral::build_laplacian(model, spectral::Bundle::forms(1), cutoff);
    const OperatorMatrix r = spectral::helicity_R(model, cutoff);
    const spectral::HodgeProjections h = spectral::hodge_projections(model, 1, cutoff);
    const SparseC rp = r.matrix * h.P.matrix;
    const OperatorMatrix plus = wrap(SparseC(0.5 * (h.P.matrix + rp)), "P+");
    const OperatorMatrix minus = wrap(SparseC(0.5 * (h.P.matrix - rp)), "P-");
    const Eigen::Index n = std::min({requested, rank_of(plus), rank_of(minus)});

    const auto vp = limits::quantum_variance(sm, r, plus, n, cd(1.0), "plus_about_+1");
    const auto vm = limits::quantum_variance(sm, r, minus, n, cd(-1.0), "minus_about_-1");
    const auto vt = limits::quantum_variance(sm, r, plus, n, cd(0.0), "plus_about_tracial");
    const limits::TracialState omega = limits::tracial_state(model, 3, 4);
    const double tracial = std::abs(limits::evaluate(omega, *r.symbol).value);
    variance_rows(csv, vp);
    variance_rows(csv, vm);
    report["n"] = n;
    report["tracial_value"] = tracial;
    report["reports"] = json::array({variance_json(vp), variance_json(vm), variance_json(vt)});
    ctx.at_most("variance_plus_about_+1", vp.variance, 1e-20);
    ctx.at_most("variance_minus_about_-1", vm.variance, 1e-20);
    ctx.within("variance_plus_about_tracial_value", vt.variance, 1.0 - 1e-10, 1.0 + 1e-10);
    ctx.at_most("helicity_tracial_value", tracial, 1e-10);
  } else {
    const ManifoldModel model = ManifoldModel::flat_torus(2);
    const auto [sm, lap] = spectral::build_laplacian(model, spectral::Bundle::functions(), cutoff);
    const spectral::TorusSymbol a = spectral::TorusSymbol::direction(
        2, [](const Eigen::VectorXd& w) { return cd(w(0) * w(0)); }, "xi_1^2/|xi|^2");
    const OperatorMatrix op = spectral::quantize(sm, a);
    const OperatorMatrix id = wrap(linalg::identity(sm.dim()), "I");
    const Eigen::Index n = std::min<Eigen::Index>(requested, sm.dim());
    const auto v = limits::quantum_variance(sm, op, id, n, cd(0.5), "about_tracial");
    variance_rows(csv, v);
    report["n"] = n;
    report["tracial_value"] = 0.5;
    report["reports"] = json::array({variance_json(v)});
    ctx.at_least("variance_about_tracial_value", v.variance, p.real("variance_min"));
  }
  ctx.write("variance.csv", csv.str());
  ctx.write_json("report.json", report);
}

// --- decomposition --------------------------------------------------------------------------

void run_decomposition(Context& ctx) {
  const Params& p = ctx.params;
  const std::string which = p.str("case");
  const double tol = p.real("tolerance");
  const ManifoldModel model = ManifoldModel::flat_torus(3);

  std::vector<Eigen::MatrixXcd> fiber_projections;
  std::vector<std::string> labels;
  std::function<Eigen::MatrixXcd(const Eigen::MatrixXd&)> rho;
  json extra;
  std::optional<algebra::CliffordModel> cl;
  if (which == "lambda1_T3") {
    const algebra::BranchingReport br = algebra::branching(3, 1);
    for (std::size_t i = 0; i < br.projections.size(); ++i) {
      fiber_projections.push_back(br.projections[i].projector);
      labels.push_back("component " + std::to_string(i) + (br.group_of_component[i] == 0 ? " (Lambda^1)" : " (Lambda^0)"));
    }
    rho = [](const Eigen::MatrixXd& u) { return algebra::exterior_power(u, 1); };
    extra["group_of_component"] = br.group_of_component;
  } else if (which == "dirac_T3") {
    cl = algebra::build_clifford(3);
    algebra::RepresentationTable spin;
    spin.group = algebra::GroupKind::Stabilizer;
    spin.ambient_dim = 3;
    spin.degree = cl->module_dim();
    spin.projective = true;
    spin.label = "spin(3) restricted to SO(2)";
    spin.map = [c = *cl](const Eigen::MatrixXd& g) { return algebra::spin_lift(c, g); };
    for (const auto& node : algebra::haar_quadrature(2)) {
      Eigen::MatrixXd g = Eigen::MatrixXd::Identity(3, 3);
      g.bottomRightCorner(2, 2) = node.element;
      spin.samples.push_back({g, spin.map(g), node.weight});
    }
    for (const auto& proj : algebra::isotypic_projections(spin)) {
      fiber_projections.push_back(proj.projector);
      labels.push_back("spinor half " + std::to_string(fiber_projections.size() - 1));
    }
    rho = spin.map;
  } else {
    fiber_projections.push_back(Eigen::MatrixXcd::Identity(1, 1));
    labels.push_back("identity");
    rho = [](const Eigen::MatrixXd&) { return Eigen::MatrixXcd::Identity(1, 1).eval(); };
  }
  const int k = static_cast<int>(fiber_projections.front().rows());

  std::vector<SymbolField> lifted;
  for (const auto& pr : fiber_projections) lifted.push_back(limits::lift_frame_projection(model, pr, rho));
  const limits::TracialState omega = limits::tracial_state(model, k, p.integer("resolution"));

  double partition = 0.0;
  double idempotence = 0.0;
  double clifford_halves = 0.0;
  for (const auto& node : omega.nodes) {
    const Eigen::VectorXd xi = limits::unit_covector(model, node.fp);
    Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(k, k);
    for (const auto& s : lifted) {
      const Eigen::MatrixXcd v = s(node.fp.point, xi);
      total += v;
      idempotence = std::max(idempotence, (v * v - v).cwiseAbs().maxCoeff());
      if (cl) {
        const Eigen::MatrixXcd g = algebra::clifford_mult(*cl, xi / xi.norm());
        const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(k, k);
        const double d = std::min((v - 0.5 * (id + g)).cwiseAbs().maxCoeff(), (v - 0.5 * (id - g)).cwiseAbs().maxCoeff());
        clifford_halves = std::max(clifford_halves, d);
      }
    }
    partition = std::max(partition, (total - Eigen::MatrixXcd::Identity(k, k)).cwiseAbs().maxCoeff());
  }
  const auto components = limits::ergodic_decomposition(omega, lifted, labels);

  // Test symbols: position-only, direction-only and mixed.
  const Eigen::MatrixXcd m1 = seeded_hermitian(k, p.seed());
  const Eigen::MatrixXcd m2 = seeded_hermitian(k, p.seed() + 1);
  std::vector<SymbolField> tests = {
      SymbolField{[k](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
                    return Eigen::MatrixXcd(std::cos(x(0)) * Eigen::MatrixXcd::Identity(k, k));
                  },
                  k},
      SymbolField{[m1](const Eigen::VectorXd&, const Eigen::VectorXd& xi) {
                    const double w = xi(0) / xi.norm();
                    return Eigen::MatrixXcd(w * w * m1);
                  },
                  k},
      SymbolField{[m2](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
                    return Eigen::MatrixXcd(std::exp(cd(0.0, x(2))) * (xi(2) / xi.norm()) * m2 + 0.25 * m2);
                  },
                  k}};

  double weight_error = 0.0;
  double convexity = 0.0;
  double invariance = 0.0;
  json comps = json::array();
  std::vector<std::vector<cd>> values(components.size());
  for (std::size_t i = 0; i < components.size(); ++i) {
    const double rank = fiber_projections[i].trace().real();
    weight_error = std::max(weight_error, std::abs(components[i].weight - rank / k));
    json c;
    c["label"] = components[i].label;
    c["rank"] = std::llround(rank);
    c["weight"] = components[i].weight;
    c["expected_weight"] = rank / k;
    json vals = json::array();
    for (const auto& s : tests) {
      const cd v = limits::component_value(omega, components[i], s).value;
      values[i].push_back(v);
      vals.push_back(complex_json(v));
      for (double t : {0.5, 2.0}) {
        const cd vt = limits::component_value(omega, components[i], limits::flow_symbol(model, s, t)).value;
        invariance = std::max(invariance, std::abs(vt - v));
      }
    }
    c["test_values"] = vals;
    comps.push_back(c);
  }
  json tracial_values = json::array();
  for (std::size_t s = 0; s < tests.size(); ++s) {
    const cd total = limits::evaluate(omega, tests[s]).value;
    cd combo = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) combo += components[i].weight * values[i][s];
    convexity = std::max(convexity, std::abs(combo - total));
    tracial_values.push_back(complex_json(total));
  }

  if (which == "lambda1_T3") {
    double upper = 0.0;
    double lower = 0.0;
    const auto groups = extra["group_of_component"].get<std::vector<int>>();
    for (std::size_t i = 0; i < components.size(); ++i) (groups[i] == 0 ? upper : lower) += components[i].weight;
    extra["grouped_weights"] = json::array({upper, lower});
    ctx.at_most("grouped_weight_error", std::max(std::abs(upper - 2.0 / 3.0), std::abs(lower - 1.0 / 3.0)), tol);
  }

  json j;
  j["case"] = which;
  j["fiber_dim"] = k;
  j["resolution"] = p.integer("resolution");
  j["node_count"] = omega.nodes.size();
  j["components"] = comps;
  j["tracial_test_values"] = tracial_values;
  j["details"] = extra;
  ctx.write_json("decomposition.json", j);

  ctx.at_most("partition_of_unity_residual", partition, tol);
  ctx.at_most("projection_idempotence", idempotence, tol);
  ctx.at_most("weight_minus_rank_over_k", weight_error, tol);
  ctx.at_most("weighted_components_minus_tracial", convexity, tol);
  ctx.at_most("component_flow_invariance", invariance, tol);
  if (cl) ctx.at_most("lift_minus_clifford_halves", clifford_halves, tol);
}

}  // namespace helab::cli::detail
