#include "helab/algebra.hpp"

#include "helab/errors.hpp"
#include "helab/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace helab::algebra {

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

Eigen::Matrix3d rot_y(double b) {
  Eigen::Matrix3d r;
  r << std::cos(b), 0, std::sin(b), 0, 1, 0, -std::sin(b), 0, std::cos(b);
  return r;
}

Eigen::Matrix4d left_quaternion(const Eigen::Vector4d& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix4d m;
  m << w, -x, -y, -z, x, w, -z, y, y, z, w, -x, z, -y, x, w;
  return m;
}

Eigen::Matrix4d right_quaternion(const Eigen::Vector4d& q) {
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  Eigen::Matrix4d m;
  m << w, -x, -y, -z, x, w, z, -y, y, -z, w, x, z, y, -x, w;
  return m;
}

// Unit quaternions from an SU(2) Euler grid (alpha, gamma over [0, 4pi)).
std::vector<std::pair<Eigen::Vector4d, double>> su2_grid(int n_angle, int n_beta) {
  const auto alpha = quadrature::periodic_trapezoid(n_angle, 4.0 * kPi);
  const auto cosb = quadrature::gauss_legendre(n_beta);
  std::vector<std::pair<Eigen::Vector4d, double>> out;
  for (std::size_t ia = 0; ia < alpha.nodes.size(); ++ia) {
    for (std::size_t ib = 0; ib < cosb.nodes.size(); ++ib) {
      for (std::size_t ig = 0; ig < alpha.nodes.size(); ++ig) {
        const double a = alpha.nodes[ia], g = alpha.nodes[ig];
        const double b = std::acos(cosb.nodes[ib]);
        // U = exp(-i a sz/2) exp(-i b sy/2) exp(-i g sz/2) = [[u, -conj(v)], [v, conj(u)]]
        const cd u = std::exp(cd(0, -(a + g) / 2)) * std::cos(b / 2);
        const cd v = std::exp(cd(0, (a - g) / 2)) * std::sin(b / 2);
        const double w = (cosb.weights[ib] / 2.0) / (n_angle * n_angle);
        out.push_back({Eigen::Vector4d(u.real(), u.imag(), v.real(), v.imag()), w});
      }
    }
  }
  return out;
}

Eigen::MatrixXd block_stabilizer(const Eigen::MatrixXd& h) {
  const Eigen::Index m = h.rows();
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(m + 1, m + 1);
  g.block(1, 1, m, m) = h;
  return g;
}

double operator_norm(const Eigen::MatrixXcd& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
  return svd.singularValues()(0);
}

Eigen::MatrixXd principal_log(const Eigen::MatrixXd& r) {
  const Eigen::Index n = r.rows();
  Eigen::RealSchur<Eigen::MatrixXd> schur(r);
  const Eigen::MatrixXd& u = schur.matrixU();
  const Eigen::MatrixXd& t = schur.matrixT();
  Eigen::MatrixXd log_t = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> minus_one;
  Eigen::Index i = 0;
  while (i < n) {
    if (i + 1 < n && std::abs(t(i + 1, i)) > 1e-14) {
      const double theta = std::atan2(0.5 * (t(i + 1, i) - t(i, i + 1)), 0.5 * (t(i, i) + t(i + 1, i + 1)));
      log_t(i, i + 1) = -theta;
      log_t(i + 1, i) = theta;
      i += 2;
    } else {
      if (t(i, i) < 0.0) minus_one.push_back(i);
      i += 1;
    }
  }
  if (minus_one.size() % 2 != 0) throw std::invalid_argument("spin_lift: matrix is not a rotation");
  for (std::size_t k = 0; k + 1 < minus_one.size(); k += 2) {
    log_t(minus_one[k], minus_one[k + 1]) = -kPi;
    log_t(minus_one[k + 1], minus_one[k]) = kPi;
  }
  Eigen::MatrixXd a = u * log_t * u.transpose();
  return 0.5 * (a - a.transpose());
}

}  // namespace

int binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<int>(r);
}

// --- Clifford -------------------------------------------------------------------------

CliffordModel build_clifford(int n) {
  if (n < 2 || n > 6) throw std::invalid_argument("build_clifford: n must lie in [2, 6]");
  Eigen::MatrixXcd s1(2, 2), s2(2, 2), s3(2, 2), id2 = Eigen::MatrixXcd::Identity(2, 2);
  s1 << 0, 1, 1, 0;
  s2 << 0, cd(0, -1), cd(0, 1), 0;
  s3 << 1, 0, 0, -1;
  const int m = n / 2;
  auto chain = [&](int j, const Eigen::MatrixXcd& middle) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
    for (int i = 0; i < j; ++i) out = kron(out, s3);
    out = kron(out, middle);
    for (int i = j + 1; i < m; ++i) out = kron(out, id2);
    return out;
  };
  CliffordModel cl;
  cl.n = n;
  for (int j = 0; j < m; ++j) {
    cl.gammas.push_back(chain(j, s1));
    cl.gammas.push_back(chain(j, s2));
  }
  if (n % 2 == 1) {
    Eigen::MatrixXcd last = Eigen::MatrixXcd::Identity(1, 1);
    for (int i = 0; i < m; ++i) last = kron(last, s3);
    cl.gammas.push_back(last);
  }
  return cl;
}

Eigen::MatrixXcd clifford_mult(const CliffordModel& cl, const Eigen::VectorXd& xi) {
  if (xi.size() != cl.n) throw std::invalid_argument("clifford_mult: dimension mismatch");
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(cl.module_dim(), cl.module_dim());
  for (int i = 0; i < cl.n; ++i) out += xi(i) * cl.gammas[i];
  return out;
}

Eigen::MatrixXcd spin_lift(const CliffordModel& cl, const Eigen::MatrixXd& rotation) {
  if (rotation.rows() != cl.n || rotation.cols() != cl.n) {
    throw std::invalid_argument("spin_lift: rotation size must match the Clifford dimension");
  }
  const Eigen::MatrixXd a = principal_log(rotation);
  const int d = cl.module_dim();
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 0; i < cl.n; ++i) {
    for (int j = 0; j < cl.n; ++j) {
      if (i != j && a(i, j) != 0.0) b += 0.25 * a(i, j) * cl.gammas[i] * cl.gammas[j];
    }
  }
  // b is anti-Hermitian: exp(b) = V exp(i L) V^* with h = -i b.
  const Eigen::MatrixXcd h = cd(0, -1) * b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (h + h.adjoint()));
  const Eigen::VectorXcd phases = (cd(0, 1) * es.eigenvalues().cast<cd>()).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// --- Haar quadrature ---------------------------------------------------------------------

std::vector<HaarNode> haar_quadrature(int m) {
  std::vector<HaarNode> nodes;
  switch (m) {
    case 1:
      nodes.push_back({Eigen::MatrixXd::Identity(1, 1), 1.0});
      break;
    case 2: {
      const auto rule = quadrature::periodic_trapezoid(64, 2.0 * kPi);
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        Eigen::MatrixXd r(2, 2);
        const double a = rule.nodes[i];
        r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
        nodes.push_back({r, 1.0 / rule.nodes.size()});
      }
      break;
    }
    case 3: {
      const auto angle = quadrature::periodic_trapezoid(16, 2.0 * kPi);
      const auto cosb = quadrature::gauss_legendre(16);
      for (double a : angle.nodes) {
        for (std::size_t ib = 0; ib < cosb.nodes.size(); ++ib) {
          for (double g : angle.nodes) {
            const Eigen::Matrix3d r = rot_z(a) * rot_y(std::acos(cosb.nodes[ib])) * rot_z(g);
            nodes.push_back({r, cosb.weights[ib] / 2.0 / 256.0});
          }
        }
      }
      break;
    }
    case 4: {
      const auto grid = su2_grid(6, 4);
      for (const auto& [ql, wl] : grid) {
        const Eigen::Matrix4d l = left_quaternion(ql);
        for (const auto& [qr, wr] : grid) {
          const Eigen::Vector4d conj(qr(0), -qr(1), -qr(2), -qr(3));
          nodes.push_back({l * right_quaternion(conj), wl * wr});
        }
      }
      break;
    }
    default:
      throw CapabilityError("haar_quadrature: SO(" + std::to_string(m) + ") is not supported (1 <= m <= 4)");
  }
  return nodes;
}

std::vector<HaarNode> haar_random(int m, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<HaarNode> nodes;
  for (int c = 0; c < count; ++c) {
    Eigen::MatrixXd z(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) z(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < m; ++i) {
      if (r(i, i) < 0) q.col(i) = -q.col(i);
    }
    if (q.determinant() < 0) q.col(0) = -q.col(0);
    nodes.push_back({q, 1.0 / count});
  }
  return nodes;
}

// --- exterior powers ------------------------------------------------------------------------

std::vector<std::vector<int>> exterior_basis(int n, int p) {
  std::vector<std::vector<int>> out;
  if (p < 0 || p > n) return out;
  std::vector<int> idx(p);
  for (int i = 0; i < p; ++i) idx[i] = i;
  while (true) {
    out.push_back(idx);
    int i = p - 1;
    while (i >= 0 && idx[i] == n - p + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < p; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

Eigen::MatrixXcd exterior_power(const Eigen::MatrixXd& g, int p) {
  const int n = static_cast<int>(g.rows());
  const auto basis = exterior_basis(n, p);
  const Eigen::Index k = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXcd out(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) {
      if (p == 0) {
        out(r, c) = 1.0;
        continue;
      }
      Eigen::MatrixXd minor(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) minor(i, j) = g(basis[r][i], basis[c][j]);
      out(r, c) = minor.determinant();
    }
  }
  return out;
}

RepresentationTable exterior_rep(int n, int p, int sample_count, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("exterior_rep: n must be positive");
  if (p < 0 || p > n) throw std::invalid_argument("exterior_rep: p must satisfy 0 <= p <= n");
  RepresentationTable rep;
  rep.group = GroupKind::SpecialOrthogonal;
  rep.ambient_dim = n;
  rep.degree = binomial(n, p);
  rep.projective = false;
  rep.label = "Lambda^" + std::to_string(p) + " C^" + std::to_string(n);
  rep.map = [p](const Eigen::MatrixXd& g) { return exterior_power(g, p); };
  for (const auto& node : haar_random(n, sample_count, seed)) {
    rep.samples.push_back({node.element, rep.map(node.element), node.weight});
  }
  return rep;
}

RepresentationTable restrict_to_stabilizer(const RepresentationTable& rep) {
  if (rep.group != GroupKind::SpecialOrthogonal) {
    throw std::invalid_argument("restrict_to_stabilizer: table is already over SO(n-1)");
  }
  RepresentationTable out = rep;
  out.group = GroupKind::Stabilizer;
  out.label = rep.label + " | SO(" + std::to_string(rep.ambient_dim - 1) + ")";
  out.samples.clear();
  for (const auto& node : haar_quadrature(rep.ambient_dim - 1)) {
    const Eigen::MatrixXd g = block_stabilizer(node.element);
    out.samples.push_back({g, rep.map(g), node.weight});
  }
  return out;
}

// --- invariant subspaces ---------------------------------------------------------------------

std::vector<IsotypicProjection> isotypic_projections(const RepresentationTable& rep, std::uint64_t seed,
                                                     double relative_gap) {
  const int k = rep.degree;
  if (k == 0) return {};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXcd x(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) x(i, j) = cd(normal(rng), normal(rng));
  x = 0.5 * (x + x.adjoint()).eval();

  Eigen::MatrixXcd avg = Eigen::MatrixXcd::Zero(k, k);
  double weight_sum = 0.0;
  for (const auto& s : rep.samples) {
    avg += s.weight * (s.matrix * x * s.matrix.adjoint());
    weight_sum += s.weight;
  }
  avg /= weight_sum;
  avg = 0.5 * (avg + avg.adjoint()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(avg);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = std::max(ev.cwiseAbs().maxCoeff(), ev(k - 1) - ev(0));
  const double threshold = relative_gap * std::max(scale, 1e-300);

  std::vector<IsotypicProjection> out;
  int start = 0;
  for (int i = 1; i <= k; ++i) {
    if (i == k || ev(i) - ev(i - 1) > threshold) {
      const Eigen::MatrixXcd v = es.eigenvectors().middleCols(start, i - start);
      out.push_back({v * v.adjoint(), i - start, static_cast<int>(out.size())});
      start = i;
    }
  }

  if (commutant_residual(rep, out) > 1e-8) {
    throw ResolutionError("isotypic_projections: Haar quadrature too coarse for " + rep.label);
  }
  Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(k, k);
  for (const auto& p : out) total += p.projector;
  if ((total - Eigen::MatrixXcd::Identity(k, k)).norm() > 1e-8) {
    throw ResolutionError("isotypic_projections: projections do not sum to the identity");
  }
  return out;
}

double commutant_residual(const RepresentationTable& rep, const std::vector<IsotypicProjection>& projections) {
  double worst = 0.0;
  for (const auto& s : rep.samples) {
    for (const auto& p : projections) {
      // Frobenius norm bounds the operator norm from above.
      worst = std::max(worst, (p.projector * s.matrix - s.matrix * p.projector).norm());
    }
  }
  return worst;
}

RepresentationTable conjugation_rep(const CliffordModel& cl) {
  RepresentationTable rep;
  rep.group = GroupKind::Stabilizer;
  rep.ambient_dim = cl.n;
  rep.degree = cl.module_dim();
  rep.projective = true;
  rep.label = "spin C^" + std::to_string(cl.module_dim()) + " | SO(" + std::to_string(cl.n - 1) + ")";
  rep.map = [cl](const Eigen::MatrixXd& g) { return spin_lift(cl, g); };
  for (const auto& node : haar_quadrature(cl.n - 1)) {
    const Eigen::MatrixXd g = block_stabilizer(node.element);
    rep.samples.push_back({g, rep.map(g), node.weight});
  }
  return rep;
}

Eigen::MatrixXcd conjugation_action(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& x) {
  return rho.adjoint() * x * rho;
}

// --- branching -------------------------------------------------------------------------------

BranchingReport branching(int n, int p) {
  if (n < 2) throw std::invalid_argument("branching: n must be at least 2");
  BranchingReport report;
  report.n = n;
  report.p = p;
  const RepresentationTable restricted = restrict_to_stabilizer(exterior_rep(n, p));
  report.projections = isotypic_projections(restricted);
  const int k = restricted.degree;
  Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(k, k);
  for (const auto& proj : report.projections) {
    report.ranks.push_back(proj.dimension);
    total += proj.projector;
  }
  report.identity_residual = operator_norm(total - Eigen::MatrixXcd::Identity(k, k));
  report.commutant_residual = commutant_residual(restricted, report.projections);

  // Characters on a thinned sample of the stabilizer quadrature.
  const std::size_t stride = std::max<std::size_t>(1, restricted.samples.size() / 512);
  std::vector<std::vector<cd>> chi;
  std::vector<cd> chi_upper, chi_lower;
  for (std::size_t s = 0; s < restricted.samples.size(); s += stride) {
    const auto& sample = restricted.samples[s];
    const Eigen::MatrixXd h = sample.element.block(1, 1, n - 1, n - 1);
    chi_upper.push_back(p <= n - 1 ? exterior_power(h, p).trace() : cd(0));
    chi_lower.push_back(p >= 1 ? exterior_power(h, p - 1).trace() : cd(0));
    std::vector<cd> row;
    for (const auto& proj : report.projections) row.push_back((proj.projector * sample.matrix).trace());
    chi.push_back(row);
  }
  const int r = static_cast<int>(report.projections.size());
  double best = std::numeric_limits<double>::infinity();
  unsigned best_mask = 0;
  for (unsigned mask = 0; mask < (1u << r); ++mask) {
    double worst = 0.0;
    for (std::size_t s = 0; s < chi.size(); ++s) {
      cd up = 0, lo = 0;
      for (int i = 0; i < r; ++i) ((mask >> i) & 1u ? lo : up) += chi[s][i];
      worst = std::max(worst, std::abs(up - chi_upper[s]) + std::abs(lo - chi_lower[s]));
    }
    if (worst < best) {
      best = worst;
      best_mask = mask;
    }
  }
  report.character_residual = best;
  for (int i = 0; i < r; ++i) {
    const int group = (best_mask >> i) & 1u;
    report.group_of_component.push_back(group);
    (group == 0 ? report.rank_upper : report.rank_lower) += report.ranks[i];
  }
  report.split_matches = best < 1e-8 && report.rank_upper == binomial(n - 1, p) &&
                         report.rank_lower == binomial(n - 1, p - 1);
  return report;
}

}  // namespace helab::algebra
