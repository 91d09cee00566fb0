#include "helab/algebra.hpp"
#include "helab/errors.hpp"
#include "helab/spectral.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <map>
#include <random>
#include <sstream>

using namespace helab;
using namespace helab::spectral;
using geometry::ManifoldModel;
using linalg::SparseC;
using cd = std::complex<double>;

namespace {

template <class E>
double max_abs(const Eigen::SparseMatrixBase<E>& expr) {
  const SparseC a = expr;
  double m = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseC::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

template <class E>
double max_abs(const Eigen::MatrixBase<E>& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd dense(const SparseC& a) { return Eigen::MatrixXcd(a); }

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct FormCase {
  ManifoldModel model;
  int cutoff;
};

std::vector<FormCase> structural_cases() {
  return {{ManifoldModel::flat_torus(2), 8}, {ManifoldModel::flat_torus(3), 4}, {ManifoldModel::round_sphere(), 16}};
}

}  // namespace

TEST_CASE("Laplacian eigenvalues") {
  const auto [t2, lap] = build_laplacian(ManifoldModel::flat_torus(2), Bundle::functions(), 1);
  CHECK(t2.eigenvalues == std::vector<double>{0, 1, 1, 1, 1, 2, 2, 2, 2});
  CHECK(linalg::hermitian_eigenvalues(lap.matrix) == std::vector<double>{0, 1, 1, 1, 1, 2, 2, 2, 2});

  // Enumeration oracle on T^3: |k|^2 over the cube.
  std::vector<double> expected;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b)
      for (int c = -2; c <= 2; ++c)
        for (int comp = 0; comp < 3; ++comp) expected.push_back(a * a + b * b + c * c);
  const auto [t3, lap3] = build_laplacian(ManifoldModel::flat_torus(3), Bundle::forms(1), 2);
  CHECK(t3.eigenvalues == sorted(expected));
  CHECK(t3.fiber_dim == 3);

  const auto [s2, lap_s] = build_laplacian(ManifoldModel::round_sphere(), Bundle::functions(), 2);
  CHECK(s2.eigenvalues == std::vector<double>{0, 2, 2, 2, 6, 6, 6, 6, 6});
  const auto [s1, lap_s1] = build_laplacian(ManifoldModel::round_sphere(), Bundle::forms(1), 2);
  CHECK(s1.dim() == 2 * (3 + 5));
  CHECK(s1.eigenvalues.front() == 2.0);

  // Non-square periods rescale the wave vectors.
  const auto [tl, lap_l] = build_laplacian(ManifoldModel::flat_torus(2, {2 * oracle::pi, oracle::pi}), Bundle::functions(), 1);
  CHECK(tl.eigenvalues.back() == doctest::Approx(5.0));

  const auto [shifted_model, shifted] = build_laplacian(ManifoldModel::flat_torus(2), Bundle::functions(), 1, 0.5, 2.0);
  const auto ev = linalg::hermitian_eigenvalues(shifted.matrix);
  for (std::size_t i = 0; i < ev.size(); ++i) CHECK(ev[i] == doctest::Approx(t2.eigenvalues[i] + 4.5));
  CHECK(shifted_model.eigenvalues == t2.eigenvalues);
  CHECK(lap.symbol.has_value());
  CHECK((*lap.symbol)(Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(3, 4))(0, 0) == cd(25.0));

  CHECK_THROWS_AS(build_laplacian(ManifoldModel::hyperbolic_octagon(), Bundle::functions(), 2), CapabilityError);
  CHECK_THROWS_AS(build_laplacian(ManifoldModel::round_sphere(), Bundle::spinors(), 2), CapabilityError);
  CHECK_THROWS_AS(build_laplacian(ManifoldModel::flat_torus(2), Bundle::functions(), 2, -1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(build_laplacian(ManifoldModel::flat_torus(2), Bundle::functions(), 2, 0.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_laplacian(ManifoldModel::flat_torus(2), Bundle::forms(3), 2), std::invalid_argument);
}

TEST_CASE("basis bookkeeping") {
  const SpectralModel sm = spectral_basis(ManifoldModel::flat_torus(2), Bundle::forms(1), 3);
  CHECK(sm.dim() == 49 * 2);
  for (Eigen::Index i = 0; i < sm.dim(); ++i) CHECK(sm.index_of(sm.basis[i]) == i);
  CHECK(sm.index_of({{9, 9}, 0, 0}) == -1);
  for (std::size_t i = 1; i < sm.eigenvalues.size(); ++i) CHECK(sm.eigenvalues[i - 1] <= sm.eigenvalues[i]);
  Eigen::Index covered = 0;
  for (auto [b, e] : sm.degeneracy_blocks()) {
    CHECK(b == covered);
    for (Eigen::Index i = b; i < e; ++i) CHECK(sm.eigenvalues[i] == sm.eigenvalues[b]);
    covered = e;
  }
  CHECK(covered == sm.dim());
}

TEST_CASE("structural identities for d, delta and the Hodge projections") {
  for (const auto& c : structural_cases()) {
    const int n = c.model.dim;
    CAPTURE(c.model.name());
    for (int p = 0; p <= n; ++p) {
      CAPTURE(p);
      const auto [sm, lap] = build_laplacian(c.model, Bundle::forms(p), c.cutoff);
      const Eigen::Index dim = sm.dim();
      const double scale = std::max(1.0, sm.eigenvalues.back());
      if (p + 1 < n + 1 && p + 2 <= n) {
        const SparseC dd = exterior_d(c.model, p + 1, c.cutoff).matrix * exterior_d(c.model, p, c.cutoff).matrix;
        CHECK(max_abs(dd) == 0.0);
      }
      SparseC hodge(dim, dim);
      if (p < n) {
        const SparseC d = exterior_d(c.model, p, c.cutoff).matrix;
        const SparseC delta = codifferential(c.model, p + 1, c.cutoff).matrix;
        CHECK(max_abs(dense(delta) - dense(d).adjoint()) == 0.0);
        hodge += delta * d;
      }
      if (p > 0) {
        hodge += exterior_d(c.model, p - 1, c.cutoff).matrix * codifferential(c.model, p, c.cutoff).matrix;
        if (p >= 2) {
          CHECK(max_abs(codifferential(c.model, p - 1, c.cutoff).matrix * codifferential(c.model, p, c.cutoff).matrix) == 0.0);
        }
      } else {
        CHECK(codifferential(c.model, 0, c.cutoff).matrix.rows() == 0);
      }
      CHECK(max_abs(hodge - lap.matrix) <= 1e-12 * scale);

      const HodgeProjections hp = hodge_projections(c.model, p, c.cutoff);
      const SparseC id = linalg::identity(dim);
      CHECK(max_abs(hp.P.matrix + hp.Q.matrix + hp.H.matrix - id) <= 1e-10);
      CHECK(max_abs(hp.P.matrix * hp.P.matrix - hp.P.matrix) <= 1e-10);
      CHECK(max_abs(hp.Q.matrix * hp.Q.matrix - hp.Q.matrix) <= 1e-10);
      CHECK(max_abs(hp.H.matrix * hp.H.matrix - hp.H.matrix) <= 1e-10);
      CHECK(max_abs(hp.P.matrix * hp.Q.matrix) <= 1e-10);
      CHECK(max_abs(hp.Q.matrix * hp.P.matrix) <= 1e-10);
      CHECK(max_abs(hp.P.matrix * hp.H.matrix) <= 1e-10);
      CHECK(max_abs(SparseC(hp.P.matrix * lap.matrix - lap.matrix * hp.P.matrix)) <= 1e-10 * scale);
      CHECK(max_abs(SparseC(hp.Q.matrix * lap.matrix - lap.matrix * hp.Q.matrix)) <= 1e-10 * scale);
      CHECK(linalg::hermitian_defect(hp.P.matrix) <= 1e-12);
      if (p == 0) CHECK(max_abs(hp.Q.matrix) == 0.0);
    }
  }
}

TEST_CASE("Hodge star") {
  for (const auto& model : {ManifoldModel::flat_torus(2), ManifoldModel::flat_torus(3), ManifoldModel::round_sphere()}) {
    const int n = model.dim;
    for (int p = 0; p <= n; ++p) {
      const SparseC ss = hodge_star(model, n - p, 3).matrix * hodge_star(model, p, 3).matrix;
      const double sign = (p * (n - p)) % 2 == 0 ? 1.0 : -1.0;
      CHECK(max_abs(SparseC(ss - sign * linalg::identity(ss.rows()))) == 0.0);
    }
  }
  // On 1-forms of T^3 the codifferential from 2-forms is (+-) * d *.
  const ManifoldModel t3 = ManifoldModel::flat_torus(3);
  const SparseC via_star = hodge_star(t3, 2, 3).matrix * exterior_d(t3, 1, 3).matrix * hodge_star(t3, 1, 3).matrix;
  CHECK(max_abs(SparseC(codifferential(t3, 2, 3).matrix - via_star)) == 0.0);
}

TEST_CASE("d on Fourier modes of T^3") {
  const ManifoldModel t3 = ManifoldModel::flat_torus(3);
  const int cutoff = 2;
  const SpectralModel f = spectral_basis(t3, Bundle::functions(), cutoff);
  const SpectralModel one = spectral_basis(t3, Bundle::forms(1), cutoff);
  const Eigen::MatrixXcd d0 = dense(exterior_d(t3, 0, cutoff).matrix);
  // d e_k = sum_j i k_j e_k dx^j.
  for (Eigen::Index col = 0; col < f.dim(); ++col) {
    const auto& k = f.basis[col].mode;
    Eigen::VectorXcd expected = Eigen::VectorXcd::Zero(one.dim());
    for (int j = 0; j < 3; ++j) expected(one.index_of({k, 0, j})) = cd(0.0, k[j]);
    CHECK(max_abs(Eigen::MatrixXcd(d0.col(col) - expected)) == 0.0);
  }
  // d (e_k dx^i) = i k ^ dx^i, coordinates via the wedge oracle.
  const SpectralModel two = spectral_basis(t3, Bundle::forms(2), cutoff);
  const Eigen::MatrixXcd d1 = dense(exterior_d(t3, 1, cutoff).matrix);
  for (Eigen::Index col = 0; col < one.dim(); ++col) {
    const auto& lab = one.basis[col];
    Eigen::VectorXd kv(3), e = Eigen::VectorXd::Zero(3);
    kv << lab.mode[0], lab.mode[1], lab.mode[2];
    e(lab.component) = 1.0;
    const Eigen::VectorXd w = oracle::wedge2(kv, e);
    for (int c = 0; c < 3; ++c) CHECK(d1(two.index_of({lab.mode, 0, c}), col) == cd(0.0, w(c)));
  }
}

TEST_CASE("Hodge ranks") {
  const HodgeProjections t2 = hodge_projections(ManifoldModel::flat_torus(2), 1, 8);
  CHECK(std::abs(dense(t2.H.matrix).trace().real() - 2.0) < 1e-10);

  const HodgeProjections t3 = hodge_projections(ManifoldModel::flat_torus(3), 1, 1);
  // Per nonzero mode: one exact and two co-exact directions; 26 nonzero modes.
  CHECK(std::abs(dense(t3.P.matrix).trace().real() - 52.0) < 1e-10);
  CHECK(std::abs(dense(t3.Q.matrix).trace().real() - 26.0) < 1e-10);
  CHECK(std::abs(dense(t3.H.matrix).trace().real() - 3.0) < 1e-10);

  const HodgeProjections s1 = hodge_projections(ManifoldModel::round_sphere(), 1, 6);
  CHECK(std::abs(dense(s1.H.matrix).trace().real()) < 1e-10);

  const HodgeProjections f0 = hodge_projections(ManifoldModel::flat_torus(2), 0, 4);
  const SpectralModel sm0 = spectral_basis(ManifoldModel::flat_torus(2), Bundle::functions(), 4);
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Identity(sm0.dim(), sm0.dim());
  expected(0, 0) = 0.0;
  CHECK(max_abs(Eigen::MatrixXcd(dense(f0.P.matrix) - expected)) <= 1e-12);
}

TEST_CASE("helicity") {
  const ManifoldModel t3 = ManifoldModel::flat_torus(3);
  const int cutoff = 4;
  const OperatorMatrix r = helicity_R(t3, cutoff);
  const HodgeProjections hp = hodge_projections(t3, 1, cutoff);
  const auto [sm, lap] = build_laplacian(t3, Bundle::forms(1), cutoff);
  CHECK(max_abs(SparseC(r.matrix * r.matrix * hp.P.matrix - hp.P.matrix)) <= 1e-10);
  CHECK(max_abs(SparseC(r.matrix * hp.P.matrix - hp.P.matrix * r.matrix)) <= 1e-10);
  CHECK(max_abs(SparseC(r.matrix * lap.matrix - lap.matrix * r.matrix)) <= 1e-10 * sm.eigenvalues.back());
  CHECK(linalg::hermitian_defect(r.matrix) <= 1e-12);
  // R vanishes on exact and harmonic forms.
  CHECK(max_abs(SparseC(r.matrix * hp.H.matrix)) == 0.0);
  CHECK(max_abs(SparseC(r.matrix * hp.Q.matrix)) <= 1e-12);

  // Shell k = (1, 0, 0): the co-exact plane is spanned by dx2, dx3 and splits into +-1.
  const std::vector<int> k{1, 0, 0};
  std::vector<Eigen::Index> idx;
  for (int c = 0; c < 3; ++c) idx.push_back(sm.index_of({k, 0, c}));
  const Eigen::MatrixXcd block = linalg::extract(r.matrix, idx, idx);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block);
  CHECK(std::abs(es.eigenvalues()(0) + 1.0) < 1e-12);
  CHECK(std::abs(es.eigenvalues()(1)) < 1e-12);
  CHECK(std::abs(es.eigenvalues()(2) - 1.0) < 1e-12);

  // Eigenvalues of R are exactly -1, 0, +1 on every shell.
  for (double v : linalg::hermitian_eigenvalues(r.matrix)) {
    CHECK(std::min({std::abs(v + 1.0), std::abs(v), std::abs(v - 1.0)}) <= 1e-12);
  }

  // Orientation reversal anticommutes with R.
  const OperatorMatrix refl = reflection(sm, 0);
  CHECK(max_abs(SparseC(refl.matrix * refl.matrix - linalg::identity(sm.dim()))) == 0.0);
  CHECK(max_abs(SparseC(refl.matrix * r.matrix + r.matrix * refl.matrix)) <= 1e-12);
  CHECK(max_abs(SparseC(refl.matrix * lap.matrix - lap.matrix * refl.matrix)) == 0.0);

  // Symbol: i w x v, Hermitian with eigenvalues -1, 0, 1.
  const Eigen::MatrixXcd sym = (*r.symbol)(Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 2, 2));
  CHECK(max_abs(Eigen::MatrixXcd(sym - sym.adjoint())) < 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ss(sym);
  CHECK(std::abs(ss.eigenvalues()(0) + 1.0) < 1e-14);
  CHECK(std::abs(ss.eigenvalues()(2) - 1.0) < 1e-14);

  CHECK_THROWS_AS(helicity_R(ManifoldModel::flat_torus(2), 2), CapabilityError);
  CHECK_THROWS_AS(helicity_R(ManifoldModel::round_sphere(), 2), CapabilityError);
  CHECK_THROWS_AS(reflection(spectral_basis(t3, Bundle::spinors(), 1), 0), CapabilityError);
  CHECK_THROWS_AS(reflection(sm, 3), std::invalid_argument);
}

TEST_CASE("Dirac operator") {
  for (auto [n, cutoff] : std::vector<std::pair<int, int>>{{2, 8}, {3, 4}}) {
    const ManifoldModel t = ManifoldModel::flat_torus(n);
    const auto [sm, d] = build_dirac(t, cutoff);
    const auto [lsm, lap] = build_laplacian(t, Bundle::spinors(), cutoff);
    const algebra::CliffordModel cl = algebra::build_clifford(n);
    const int s = cl.module_dim();
    CHECK(linalg::hermitian_defect(d.matrix) == 0.0);
    CHECK(max_abs(SparseC(d.matrix * d.matrix - lap.matrix)) <= 1e-12 * lsm.eigenvalues.back());

    // spec(D)^2 = spec(D^2) as multisets.
    std::vector<double> squares;
    for (double v : linalg::hermitian_eigenvalues(d.matrix)) squares.push_back(v * v);
    const auto lap_ev = sorted(lsm.eigenvalues);
    squares = sorted(squares);
    REQUIRE(squares.size() == lap_ev.size());
    for (std::size_t i = 0; i < squares.size(); ++i) CHECK(std::abs(squares[i] - lap_ev[i]) <= 1e-12 * std::max(1.0, lap_ev[i]));

    const SignDecomposition sd = sign_and_halves(d);
    CHECK(sd.kernel_dim == s);
    const SparseC id = linalg::identity(sm.dim());
    CHECK(max_abs(SparseC(sd.sign.matrix * sd.sign.matrix + sd.kernel.matrix - id)) <= 1e-12);
    CHECK(max_abs(SparseC(sd.plus.matrix + sd.minus.matrix + sd.kernel.matrix - id)) <= 1e-12);
    CHECK(max_abs(SparseC(sd.plus.matrix * sd.abs.matrix - sd.abs.matrix * sd.plus.matrix)) <= 1e-12);
    CHECK(max_abs(SparseC(sd.minus.matrix * sd.abs.matrix - sd.abs.matrix * sd.minus.matrix)) <= 1e-12);

    // Blockwise: sign(D) on mode k is gamma_{k/|k|}; zero block on k = 0.
    std::map<long long, std::pair<double, double>> shell_traces;
    for (Eigen::Index j = 0; j < sm.dim(); ++j) {
      const auto& lab = sm.basis[j];
      if (lab.component != 0) continue;
      std::vector<Eigen::Index> idx;
      for (int a = 0; a < s; ++a) idx.push_back(sm.index_of({lab.mode, 0, a}));
      Eigen::VectorXd k(n);
      long long k2 = 0;
      for (int i = 0; i < n; ++i) {
        k(i) = lab.mode[i];
        k2 += static_cast<long long>(lab.mode[i]) * lab.mode[i];
      }
      const Eigen::MatrixXcd block = linalg::extract(sd.sign.matrix, idx, idx);
      if (k2 == 0) {
        CHECK(max_abs(block) == 0.0);
        CHECK(max_abs(linalg::extract(d.matrix, idx, idx)) == 0.0);
        continue;
      }
      CHECK(max_abs(Eigen::MatrixXcd(block - algebra::clifford_mult(cl, k.normalized()))) <= 1e-12);
      auto& tr = shell_traces[k2];
      tr.first += linalg::extract(sd.plus.matrix, idx, idx).trace().real();
      tr.second += linalg::extract(sd.minus.matrix, idx, idx).trace().real();
    }
    for (const auto& [k2, tr] : shell_traces) CHECK(std::abs(tr.first - tr.second) <= 1e-10);
  }

  // T^2 block for k = (1, 0) is gamma_1; eigenvalues +-|k| per block.
  const auto [sm2, d2] = build_dirac(ManifoldModel::flat_torus(2), 2);
  const algebra::CliffordModel c2 = algebra::build_clifford(2);
  const std::vector<Eigen::Index> idx{sm2.index_of({{1, 0}, 0, 0}), sm2.index_of({{1, 0}, 0, 1})};
  CHECK(max_abs(Eigen::MatrixXcd(linalg::extract(sign_and_halves(d2).sign.matrix, idx, idx) - c2.gammas[0])) <= 1e-12);
  const std::vector<Eigen::Index> idx34{sm2.index_of({{2, -1}, 0, 0}), sm2.index_of({{2, -1}, 0, 1})};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(linalg::extract(d2.matrix, idx34, idx34));
  CHECK(std::abs(es.eigenvalues()(0) + std::sqrt(5.0)) < 1e-14);
  CHECK(std::abs(es.eigenvalues()(1) - std::sqrt(5.0)) < 1e-14);

  CHECK_THROWS_AS(build_dirac(ManifoldModel::round_sphere(), 2), CapabilityError);
  OperatorMatrix skew;
  skew.matrix = linalg::from_dense((Eigen::MatrixXcd(2, 2) << 0, 1, -1, 0).finished());
  CHECK_THROWS_AS(sign_and_halves(skew), std::invalid_argument);
}

TEST_CASE("quantization") {
  const ManifoldModel t2 = ManifoldModel::flat_torus(2);
  const SpectralModel sm = spectral_basis(t2, Bundle::functions(), 6);

  const Eigen::MatrixXcd one = dense(quantize(sm, TorusSymbol::constant(2, 1.0)).matrix);
  Eigen::MatrixXcd expected = Eigen::MatrixXcd::Identity(sm.dim(), sm.dim());
  expected(0, 0) = 0.0;
  CHECK(max_abs(Eigen::MatrixXcd(one - expected)) == 0.0);

  // cos x1: entries 1/2 between k and k +- e1, except into or out of k = 0.
  const Eigen::MatrixXcd c = dense(quantize(sm, TorusSymbol::cos_x(2, 0)).matrix);
  for (Eigen::Index i = 0; i < sm.dim(); ++i) {
    for (Eigen::Index j = 0; j < sm.dim(); ++j) {
      const auto& ki = sm.basis[i].mode;
      const auto& kj = sm.basis[j].mode;
      const bool neighbor = ki[1] == kj[1] && std::abs(ki[0] - kj[0]) == 1;
      const bool zero = (ki[0] == 0 && ki[1] == 0) || (kj[0] == 0 && kj[1] == 0);
      CHECK(c(i, j) == cd(neighbor && !zero ? 0.5 : 0.0));
    }
  }

  const OperatorMatrix xi1 = quantize(sm, TorusSymbol::direction(2, [](const Eigen::VectorXd& w) { return cd(w(0)); }, "xi1/|xi|"));
  const Eigen::MatrixXcd x1 = dense(xi1.matrix);
  for (Eigen::Index i = 1; i < sm.dim(); ++i) {
    const auto& k = sm.basis[i].mode;
    CHECK(std::abs(x1(i, i) - k[0] / std::hypot(k[0], k[1])) < 1e-15);
  }
  CHECK(max_abs(Eigen::MatrixXcd(x1 - Eigen::MatrixXcd(x1.diagonal().asDiagonal()))) == 0.0);

  // Symbol field evaluates the trig polynomial.
  const SymbolField field = TorusSymbol::cos_x(2, 1, 2).field();
  CHECK(std::abs(field(Eigen::Vector2d(0.3, 0.4), Eigen::Vector2d(1, 1))(0, 0) - std::cos(0.8)) < 1e-15);
  CHECK_THROWS_AS(field(Eigen::Vector2d(0.3, 0.4), Eigen::Vector2d(0, 0)), std::domain_error);

  CHECK_THROWS_AS(quantize(sm, TorusSymbol::constant(3, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(quantize(spectral_basis(t2, Bundle::forms(1), 2), TorusSymbol::constant(2, 1.0)), CapabilityError);
  TorusSymbol bad = TorusSymbol::constant(2, 1.0);
  bad.terms.front().coefficient = nullptr;
  CHECK_THROWS_AS(quantize(sm, bad), std::invalid_argument);
  CHECK_THROWS_AS(TorusSymbol::cos_x(2, 2), std::invalid_argument);
  CHECK_THROWS_AS(TorusSymbol::multiply(TorusSymbol::constant(2, 1.0), TorusSymbol::constant(3, 1.0)), std::invalid_argument);
}

TEST_CASE("quantization: adjoint defect decays and order-0 operators stay bounded") {
  const ManifoldModel t2 = ManifoldModel::flat_torus(2);
  // a = cos x1 * xi2/|xi| + i sin x2 * xi1/|xi| is not a multiplier, so Op(a)^* != Op(conj a).
  const TorusSymbol a = TorusSymbol::multiply(
      TorusSymbol::cos_x(2, 0), TorusSymbol::direction(2, [](const Eigen::VectorXd& w) { return cd(w(1), w(0)); }, "w"));
  std::vector<double> shell_defect;
  const int cutoff = 40;
  const SpectralModel sm = spectral_basis(t2, Bundle::functions(), cutoff);
  const SparseC defect = SparseC(quantize(sm, a).matrix.adjoint()) - quantize(sm, a.conjugate()).matrix;
  for (int lambda : {5, 10, 20}) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < sm.dim(); ++i) {
      const double r = std::sqrt(sm.eigenvalues[i]);
      if (r >= lambda && r < 2 * lambda) keep.push_back(i);
    }
    shell_defect.push_back(linalg::norm2(linalg::compress(defect, keep)));
  }
  for (std::size_t i = 1; i < shell_defect.size(); ++i) {
    const double ratio = shell_defect[i] / shell_defect[i - 1];
    CHECK(ratio > 0.3);
    CHECK(ratio < 0.7);
  }

  // ||Op(a)|| at K and 2K agree to O(1/K).
  double previous = 0.0, previous_gap = 0.0;
  for (int k : {8, 16, 32}) {
    const double norm = linalg::norm2(quantize(spectral_basis(t2, Bundle::functions(), k), a).matrix);
    CHECK(norm < 2.0);
    if (previous > 0.0) {
      const double gap = std::abs(norm - previous);
      CHECK(gap * k <= 4.0);
      if (previous_gap > 0.0) CHECK(gap <= previous_gap + 1e-12);
      previous_gap = gap;
    }
    previous = norm;
  }
}

TEST_CASE("sphere multiplication") {
  const SpectralModel sm = spectral_basis(ManifoldModel::round_sphere(), Bundle::functions(), 6);
  const OperatorMatrix z2 = sphere_multiplication(sm, 2);
  auto at = [&](const OperatorMatrix& op, int l1, int l2, int m) {
    return op.matrix.coeff(sm.index_of({{l1, m}, 0, 0}), sm.index_of({{l2, m}, 0, 0})).real();
  };
  CHECK(std::abs(at(z2, 1, 1, 0) - 0.6) < 1e-15);
  for (int p : {1, 2, 3}) {
    const OperatorMatrix zp = sphere_multiplication(sm, p);
    CHECK(linalg::hermitian_defect(zp.matrix) < 1e-15);
    for (auto [l1, l2, m] : std::vector<std::tuple<int, int, int>>{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 1, 1}, {2, 2, -1}, {5, 4, 3}, {6, 5, -2}, {4, 4, 4}}) {
      CAPTURE(p);
      CAPTURE(l1);
      CAPTURE(l2);
      CAPTURE(m);
      CHECK(std::abs(at(zp, l1, l2, m) - oracle::zp_element(l1, l2, m, p)) < 1e-10);
    }
  }
  // No coupling between different m.
  CHECK(z2.matrix.coeff(sm.index_of({{2, 1}, 0, 0}), sm.index_of({{2, 0}, 0, 0})) == cd(0.0));
  CHECK(max_abs(SparseC(sphere_multiplication(sm, 0).matrix - linalg::identity(sm.dim()))) == 0.0);
  CHECK_THROWS_AS(sphere_multiplication(spectral_basis(ManifoldModel::flat_torus(2), Bundle::functions(), 2), 1),
                  CapabilityError);
  CHECK_THROWS_AS(sphere_multiplication(sm, -1), std::invalid_argument);
}

TEST_CASE("heat state") {
  const auto [sm, lap] = build_laplacian(ManifoldModel::flat_torus(2), Bundle::functions(), 16);
  OperatorMatrix id;
  id.matrix = linalg::identity(sm.dim());
  const HeatTrace h1 = heat_state_trace(id, lap, 0.5);
  CHECK(h1.value == cd(1.0));
  CHECK(h1.reliable);
  CHECK(h1.t_min > 0.0);
  CHECK(heat_state_trace(quantize(sm, TorusSymbol::cos_x(2, 0)), lap, 0.3).value == cd(0.0));
  const HeatTrace early = heat_state_trace(id, lap, h1.t_min / 4);
  CHECK_FALSE(early.reliable);

  // Sphere z^2: each full l-block has trace (2l+1)/3, so the heat value is 1/3 for every t.
  const auto [ssm, slap] = build_laplacian(ManifoldModel::round_sphere(), Bundle::functions(), 32);
  const OperatorMatrix z2 = sphere_multiplication(ssm, 2);
  const double t_min = heat_state_trace(z2, slap, 1.0).t_min;
  for (double t : {0.4, 0.2, 0.1}) {
    REQUIRE(t >= t_min);
    const HeatTrace h = heat_state_trace(z2, slap, t);
    CHECK(h.reliable);
    CHECK(std::abs(h.value - 1.0 / 3.0) <= 1e-13);
  }

  CHECK_THROWS_AS(heat_state_trace(id, lap, 0.0), std::invalid_argument);
  OperatorMatrix small;
  small.matrix = linalg::identity(3);
  CHECK_THROWS_AS(heat_state_trace(small, lap, 1.0), std::invalid_argument);
}

TEST_CASE("CSV export") {
  const SpectralModel sm = spectral_basis(ManifoldModel::flat_torus(2), Bundle::forms(1), 1);
  std::ostringstream out;
  write_spectrum_csv(out, sm);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,eigenvalue,mode_1,mode_2,family,component");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == sm.dim());

  OperatorMatrix op;
  op.matrix = linalg::from_dense((Eigen::MatrixXcd(2, 2) << 1, 0, cd(0, 2), 0).finished());
  std::ostringstream ops;
  write_operator_csv(ops, op);
  std::istringstream opin(ops.str());
  std::getline(opin, line);
  CHECK(line == "row,col,re,im");
  std::getline(opin, line);
  CHECK(line == "0,0,1,0");
  std::getline(opin, line);
  CHECK(line == "1,0,0,2");
}
