#include "helab/limits.hpp"

#include "helab/errors.hpp"
#include "helab/summation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace helab::limits {

using geometry::ManifoldModel;
using linalg::cd;
using linalg::SparseC;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

std::vector<double> energies_of(const SpectralModel& sm) {
  std::vector<double> e = sm.eigenvalues;
  for (double& v : e) v += sm.potential + sm.mass * sm.mass;
  return e;
}

void require_basis(const StateFunctional& s, const OperatorMatrix& a) {
  const Eigen::Index n = static_cast<Eigen::Index>(s.energies.size());
  if (a.matrix.rows() != n || a.matrix.cols() != n) {
    throw std::invalid_argument("evaluate: operator does not act on the state's basis");
  }
}

bool shrinking(const std::vector<LadderRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].gap > 1.1 * rows[i - 1].gap + 1e-14) return false;
  }
  return true;
}

}  // namespace

std::string StateFunctional::describe() const {
  switch (kind) {
    case StateKind::Eigen:
      return "eigen(" + std::to_string(index) + ")";
    case StateKind::Cesaro:
      return "cesaro(" + std::to_string(index) + ")";
    case StateKind::Heat:
      return "heat(" + std::to_string(t) + ")";
    case StateKind::Tracial:
      return "tracial";
  }
  return "unknown";
}

StateFunctional eigen_state(const SpectralModel& sm, Eigen::Index j) {
  if (j < 0 || j >= sm.dim()) throw std::invalid_argument("eigen_state: index outside the truncation");
  return {StateKind::Eigen, j, 0.0, energies_of(sm)};
}

StateFunctional cesaro_state(const SpectralModel& sm, Eigen::Index n) {
  if (n < 1 || n > sm.dim()) throw std::invalid_argument("cesaro_state: N must lie in [1, dim]");
  Eigen::Index effective = n;
  for (const auto& [begin, end] : sm.degeneracy_blocks()) {
    if (n > begin && n <= end) {
      effective = end;
      break;
    }
  }
  return {StateKind::Cesaro, effective, 0.0, energies_of(sm)};
}

StateFunctional heat_state(const SpectralModel& sm, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("heat_state: t must be positive");
  return {StateKind::Heat, 0, t, energies_of(sm)};
}

StateValue evaluate(const StateFunctional& s, const OperatorMatrix& a) {
  require_basis(s, a);
  StateValue out;
  switch (s.kind) {
    case StateKind::Eigen:
      out.value = a.matrix.coeff(s.index, s.index);
      out.error_estimate = kEps * std::abs(out.value);
      break;
    case StateKind::Cesaro: {
      cd sum = 0.0;
      double scale = 0.0;
      for (Eigen::Index j = 0; j < s.index; ++j) {
        const cd v = a.matrix.coeff(j, j);
        sum += v;
        scale = std::max(scale, std::abs(v));
      }
      out.value = sum / static_cast<double>(s.index);
      out.error_estimate = static_cast<double>(s.index) * kEps * scale;
      break;
    }
    case StateKind::Heat: {
      const auto& e = s.energies;
      const double lmin = *std::min_element(e.begin(), e.end());
      const double lmax = *std::max_element(e.begin(), e.end());
      cd num = 0.0;
      double z = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < e.size(); ++j) {
        const double w = std::exp(-s.t * (e[j] - lmin));
        const cd v = a.matrix.coeff(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
        num += w * v;
        z += w;
        scale = std::max(scale, std::abs(v));
      }
      out.value = num / z;
      const double tail = static_cast<double>(e.size()) * std::exp(-s.t * (lmax - lmin)) / z;
      out.reliable = tail <= 1e-12;
      out.error_estimate = scale * tail;
      break;
    }
    case StateKind::Tracial:
      throw std::invalid_argument("evaluate: tracial states act on symbols");
  }
  return out;
}

// --- tracial state -------------------------------------------------------------------

Eigen::VectorXd unit_covector(const ManifoldModel& model, const flows::FramePoint& fp) {
  return geometry::metric_at(model, fp.point) * fp.frame.col(0);
}

TracialState tracial_state(const ManifoldModel& model, int fiber_dim, int resolution) {
  if (fiber_dim < 1) throw std::invalid_argument("tracial_state: fiber dimension must be positive");
  TracialState omega;
  omega.model = model;
  omega.fiber_dim = fiber_dim;
  omega.resolution = resolution;
  omega.nodes = flows::liouville_nodes(model, resolution);
  omega.coarse_nodes = flows::liouville_nodes(model, std::max(4, resolution / 2));
  return omega;
}

namespace {

cd trace_average(const TracialState& omega, const std::vector<flows::LiouvilleNode>& nodes,
                 const SymbolField& sigma) {
  CompensatedSum re, im;
  for (const auto& node : nodes) {
    const cd v = node.weight * sigma(node.fp.point, unit_covector(omega.model, node.fp)).trace();
    re.add(v.real());
    im.add(v.imag());
  }
  return cd(re.value(), im.value()) / static_cast<double>(omega.fiber_dim);
}

}  // namespace

StateValue evaluate(const TracialState& omega, const SymbolField& sigma) {
  if (sigma.fiber_dim != omega.fiber_dim) throw std::invalid_argument("tracial state: fiber dimension mismatch");
  StateValue out;
  out.value = trace_average(omega, omega.nodes, sigma);
  out.error_estimate = std::abs(out.value - trace_average(omega, omega.coarse_nodes, sigma));
  return out;
}

SymbolField flow_symbol(const ManifoldModel& model, const SymbolField& sigma, double t) {
  return SymbolField{[model, sigma, t](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
                       const Eigen::MatrixXd g = geometry::metric_at(model, x);
                       const Eigen::VectorXd v = g.inverse() * xi;
                       const double norm = std::sqrt(xi.dot(v));
                       const geometry::PointState s = geometry::geodesic_advance(model, {x, v / norm}, -t);
                       return sigma(s.point, geometry::metric_at(model, s.point) * s.velocity * norm);
                     },
                     sigma.fiber_dim};
}

// --- ladders ------------------------------------------------------------------------

StateComparison compare_states(const SpectralModel& sm, const OperatorMatrix& a, std::complex<double> tracial,
                               const std::vector<Eigen::Index>& n_ladder, const std::vector<double>& t_ladder) {
  StateComparison out;
  out.tracial = tracial;
  for (Eigen::Index n : n_ladder) {
    const StateFunctional s = cesaro_state(sm, n);
    const StateValue v = evaluate(s, a);
    out.cesaro.push_back({static_cast<double>(s.index), v.value, std::abs(v.value - tracial), v.reliable});
  }
  for (double t : t_ladder) {
    const StateValue v = evaluate(heat_state(sm, t), a);
    out.heat.push_back({t, v.value, std::abs(v.value - tracial), v.reliable});
  }
  out.cesaro_monotone = shrinking(out.cesaro);
  out.heat_monotone = shrinking(out.heat);
  return out;
}

std::vector<Eigen::Index> frequency_shell(const SpectralModel& sm, double shell) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < sm.dim(); ++j) {
    const double f = std::sqrt(std::max(0.0, sm.eigenvalues[j]));
    if (f >= shell && f < 2.0 * shell) idx.push_back(j);
  }
  return idx;
}

DecayTable negative_order_decay(const SpectralModel& sm, const OperatorMatrix& a, const std::vector<double>& shells) {
  if (a.matrix.rows() != sm.dim() || a.matrix.cols() != sm.dim()) {
    throw std::invalid_argument("negative_order_decay: operator does not act on the basis");
  }
  DecayTable table;
  for (double shell : shells) {
    const auto idx = frequency_shell(sm, shell);
    if (idx.empty()) throw std::invalid_argument("negative_order_decay: empty shell");
    DecayRow row{shell, static_cast<Eigen::Index>(idx.size()), 0.0, 0.0};
    for (Eigen::Index j : idx) row.diagonal_max = std::max(row.diagonal_max, std::abs(a.matrix.coeff(j, j)));
    row.compressed_norm = linalg::norm2(linalg::compress(a.matrix, idx));
    table.rows.push_back(row);
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const auto& p = table.rows[i - 1];
    const auto& q = table.rows[i];
    table.diagonal_ratios.push_back(p.diagonal_max > 0 ? q.diagonal_max / p.diagonal_max : 0.0);
    table.norm_ratios.push_back(p.compressed_norm > 0 ? q.compressed_norm / p.compressed_norm : 0.0);
  }
  return table;
}

double egorov_residual(const SpectralModel& sm, const spectral::TorusSymbol& a, double t, double shell) {
  if (sm.model.kind != geometry::ModelKind::FlatTorus || sm.bundle.kind != spectral::BundleKind::Functions) {
    throw CapabilityError("egorov_residual: torus functions only");
  }
  if (std::abs(t) > 10.0) throw std::invalid_argument("egorov_residual: |t| must not exceed 10");
  const auto idx = frequency_shell(sm, shell);
  if (idx.empty()) throw std::invalid_argument("egorov_residual: empty shell");
  const SparseC op = spectral::quantize(sm, a).matrix;
  SparseC evolved = op;
  for (Eigen::Index k = 0; k < evolved.outerSize(); ++k) {
    for (SparseC::InnerIterator it(evolved, k); it; ++it) {
      const double phase = t * (std::sqrt(sm.eigenvalues[it.row()]) - std::sqrt(sm.eigenvalues[it.col()]));
      it.valueRef() *= std::exp(cd(0.0, phase));
    }
  }
  const SparseC flowed = spectral::quantize(sm, a.flowed(t)).matrix;
  return linalg::norm2(linalg::compress(SparseC(evolved - flowed), idx));
}

// --- quantum variance --------------------------------------------------------------------

VarianceReport quantum_variance(const SpectralModel& sm, const OperatorMatrix& a, const OperatorMatrix& projection,
                                Eigen::Index n, std::optional<std::complex<double>> limit, std::string label) {
  const Eigen::Index dim = sm.dim();
  if (a.matrix.rows() != dim || projection.matrix.rows() != dim) {
    throw std::invalid_argument("quantum_variance: operator sizes do not match the basis");
  }
  if (n < 1) throw std::invalid_argument("quantum_variance: N must be positive");
  const SparseC lap = linalg::diagonal(sm.eigenvalues);
  const SparseC comm = projection.matrix * lap - lap * projection.matrix;
  double scale = 1.0;
  for (double v : sm.eigenvalues) scale = std::max(scale, v);
  if (linalg::norm2(comm) > 1e-10 * scale) {
    throw std::invalid_argument("quantum_variance: projection does not commute with the Laplacian");
  }

  VarianceReport rep;
  rep.label = std::move(label);
  for (const auto& [begin, end] : sm.degeneracy_blocks()) {
    if (static_cast<Eigen::Index>(rep.values.size()) >= n) break;
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = begin; j < end; ++j) idx.push_back(j);
    const Eigen::MatrixXcd p = linalg::extract(projection.matrix, idx, idx);
    if (p.norm() < 1e-12) continue;
    const Eigen::MatrixXcd ab = linalg::extract(a.matrix, idx, idx);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (p + p.adjoint()));
    for (Eigen::Index c = 0; c < es.eigenvalues().size(); ++c) {
      if (es.eigenvalues()(c) < 0.5) continue;
      const Eigen::VectorXcd phi = es.eigenvectors().col(c);
      rep.values.push_back(phi.dot(ab * phi));
      if (static_cast<Eigen::Index>(rep.values.size()) >= n) break;
    }
  }
  if (static_cast<Eigen::Index>(rep.values.size()) < n) {
    throw std::invalid_argument("quantum_variance: range of the projection holds fewer than N eigenstates");
  }
  rep.n = n;
  cd mean = 0.0;
  for (const auto& v : rep.values) mean += v;
  mean /= static_cast<double>(n);
  rep.limit_value = limit ? *limit : mean;
  double sum = 0.0;
  for (const auto& v : rep.values) {
    rep.deviations.push_back(v - rep.limit_value);
    sum += std::norm(v - rep.limit_value);
  }
  rep.variance = sum / static_cast<double>(n);
  return rep;
}

// --- ergodic decomposition ------------------------------------------------------------------

std::vector<ErgodicComponent> ergodic_decomposition(const TracialState& omega,
                                                    const std::vector<SymbolField>& projections,
                                                    const std::vector<std::string>& labels) {
  if (projections.empty()) throw std::invalid_argument("ergodic_decomposition: no projections");
  const int k = omega.fiber_dim;
  for (const auto& node : omega.nodes) {
    const Eigen::VectorXd xi = unit_covector(omega.model, node.fp);
    Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(k, k);
    for (const auto& p : projections) total += p(node.fp.point, xi);
    if ((total - Eigen::MatrixXcd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10) {
      throw std::invalid_argument("ergodic_decomposition: projections do not sum to the identity");
    }
  }
  std::vector<ErgodicComponent> out;
  for (std::size_t i = 0; i < projections.size(); ++i) {
    const double w = evaluate(omega, projections[i]).value.real();
    out.push_back({projections[i], w, i < labels.size() ? labels[i] : "p" + std::to_string(i)});
  }
  return out;
}

StateValue component_value(const TracialState& omega, const ErgodicComponent& c, const SymbolField& a) {
  const SymbolField pa{[p = c.projection, a](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
                         return Eigen::MatrixXcd(p(x, xi) * a(x, xi));
                       },
                       a.fiber_dim};
  StateValue v = evaluate(omega, pa);
  if (!(c.weight > 0.0)) throw std::invalid_argument("component_value: component has zero weight");
  v.value /= c.weight;
  v.error_estimate /= c.weight;
  return v;
}

SymbolField lift_frame_projection(const ManifoldModel& model, const Eigen::MatrixXcd& p,
                                  std::function<Eigen::MatrixXcd(const Eigen::MatrixXd&)> rho) {
  return SymbolField{[model, p, rho](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
                       const Eigen::VectorXd v = geometry::metric_at(model, x).inverse() * xi;
                       const flows::FramePoint fp = flows::frame_from_direction(model, x, v);
                       const Eigen::MatrixXd u = flows::orthonormal_gauge(model, x).inverse() * fp.frame;
                       const Eigen::MatrixXcd r = rho(u);
                       return Eigen::MatrixXcd(r * p * r.adjoint());
                     },
                     static_cast<int>(p.rows())};
}

}  // namespace helab::limits
