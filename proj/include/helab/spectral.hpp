#pragma once

// Truncated exact spectral models: Fourier modes on flat tori (functions,
// p-forms, spinors) and spherical harmonics on S^2 (functions, 1-forms,
// 2-forms). Operators are sparse matrices in the canonical basis, which is an
// eigenbasis of the Laplace-type operator ordered by eigenvalue, then mode
// label, then family and fiber component.
//
// Torus basis vectors: e_k (x) dx^I with e_k = exp(i kappa.x)/sqrt(vol),
// kappa_j = 2 pi k_j / L_j, I a sorted index subset (component = its position
// in algebra::exterior_basis). Spinor basis: e_k (x) s_a.
// Sphere basis: Y_lm (complex, Condon–Shortley); 1-forms E_lm = dY_lm/sqrt(l(l+1))
// (family 0) and C_lm = *E_lm (family 1), l >= 1; 2-forms F_lm = Y_lm vol.

#include "helab/geometry.hpp"
#include "helab/linalg.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace helab::spectral {

using linalg::SparseC;

enum class BundleKind { Functions, Forms, Spinors };

struct Bundle {
  BundleKind kind = BundleKind::Functions;
  int degree = 0;  // form degree

  static Bundle functions() { return {BundleKind::Functions, 0}; }
  static Bundle forms(int p) { return {BundleKind::Forms, p}; }
  static Bundle spinors() { return {BundleKind::Spinors, 0}; }
  std::string name() const;
};

struct ModeLabel {
  std::vector<int> mode;  // torus: k; sphere: (l, m)
  int family = 0;
  int component = 0;
};

/// Principal-symbol field on the cotangent bundle: (chart point, covector) -> m x m matrix.
struct SymbolField {
  std::function<Eigen::MatrixXcd(const Eigen::VectorXd&, const Eigen::VectorXd&)> evaluator;
  int fiber_dim = 1;

  Eigen::MatrixXcd operator()(const Eigen::VectorXd& x, const Eigen::VectorXd& xi) const {
    return evaluator(x, xi);
  }
};

struct SpectralModel {
  geometry::ManifoldModel model;
  Bundle bundle;
  int cutoff = 0;
  std::vector<ModeLabel> basis;
  std::vector<double> eigenvalues;  // of the unshifted Laplace-type operator, nondecreasing
  int fiber_dim = 1;
  double potential = 0.0;
  double mass = 0.0;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(basis.size()); }
  /// Position of a basis label, or -1.
  Eigen::Index index_of(const ModeLabel& label) const;
  /// [begin, end) ranges of equal eigenvalues in basis order.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> degeneracy_blocks() const;

  std::map<std::tuple<std::vector<int>, int, int>, Eigen::Index> lookup;
};

/// Canonical basis for (model, bundle) with cutoff K (torus: max |k_i|; sphere: max l).
/// Throws CapabilityError for unsupported pairs.
SpectralModel spectral_basis(const geometry::ManifoldModel& model, const Bundle& bundle, int cutoff);

struct OperatorMatrix {
  SparseC matrix;
  std::optional<SymbolField> symbol;
  int order = 0;
  bool self_adjoint = false;
  std::string label;
};

/// Delta_E + V + m0^2 (diagonal in the canonical basis), symbol g(xi, xi) I.
std::pair<SpectralModel, OperatorMatrix> build_laplacian(const geometry::ManifoldModel& model,
                                                         const Bundle& bundle, int cutoff,
                                                         double potential = 0.0, double mass = 0.0);

/// d: Omega^p -> Omega^{p+1}; delta: Omega^p -> Omega^{p-1} (0 rows for p = 0);
/// *: Omega^p -> Omega^{n-p}. Rectangular matrices between canonical bases.
OperatorMatrix exterior_d(const geometry::ManifoldModel& model, int p, int cutoff);
OperatorMatrix codifferential(const geometry::ManifoldModel& model, int p, int cutoff);
OperatorMatrix hodge_star(const geometry::ManifoldModel& model, int p, int cutoff);

/// P = Delta^+ delta d (co-exact), Q = Delta^+ d delta (exact), H = ker Delta_p.
struct HodgeProjections {
  OperatorMatrix P;
  OperatorMatrix Q;
  OperatorMatrix H;
};
HodgeProjections hodge_projections(const geometry::ManifoldModel& model, int p, int cutoff);

/// Helicity R = Delta_1^{-1/2} * d on 1-forms of T^3, symbol v -> i (xi/|xi|) x v.
OperatorMatrix helicity_R(const geometry::ManifoldModel& model, int cutoff);

/// Pullback by the reflection x_axis -> -x_axis on torus functions or forms.
OperatorMatrix reflection(const SpectralModel& sm, int axis);

/// Dirac operator on a flat torus (trivial spin structure): block gamma.kappa per mode.
std::pair<SpectralModel, OperatorMatrix> build_dirac(const geometry::ManifoldModel& model, int cutoff);

struct SignDecomposition {
  OperatorMatrix sign;    // sign(D), sign(0) = 0
  OperatorMatrix plus;    // spectral projection onto D > 0
  OperatorMatrix minus;   // spectral projection onto D < 0
  OperatorMatrix abs;     // |D|
  OperatorMatrix kernel;  // projection onto ker D
  int kernel_dim = 0;
};
SignDecomposition sign_and_halves(const OperatorMatrix& dirac);

/// Symbol on S^* T^n: sum over terms of c_m(xi/|xi|) exp(i kappa_m . x).
struct TorusSymbol {
  struct Term {
    std::vector<int> mode;
    std::function<std::complex<double>(const Eigen::VectorXd&)> coefficient;  // of the unit direction
  };
  int dim = 2;
  std::vector<double> periods;
  std::vector<Term> terms;
  std::string description;

  static TorusSymbol constant(int dim, std::complex<double> c);
  /// cos(kappa . x) for the integer mode `axis` unit vector scaled by `frequency`.
  static TorusSymbol cos_x(int dim, int axis, int frequency = 1);
  /// Function of the direction only.
  static TorusSymbol direction(int dim, std::function<std::complex<double>(const Eigen::VectorXd&)> f,
                               std::string description);
  /// Pointwise product of two symbols.
  static TorusSymbol multiply(const TorusSymbol& a, const TorusSymbol& b);

  /// a o G_t: the symbol transported by the geodesic flow, c_m(w) exp(i t kappa_m . w).
  TorusSymbol flowed(double t) const;
  /// Complex conjugate symbol.
  TorusSymbol conjugate() const;
  SymbolField field() const;
};

/// Left quantization on torus functions: <e_k', Op(a) e_k> = c_{k'-k}(kappa_k/|kappa_k|);
/// the k = 0 row and column vanish. Throws std::invalid_argument on dimension mismatch.
OperatorMatrix quantize(const SpectralModel& sm, const TorusSymbol& a);

/// Multiplication by z^power on sphere functions (exact on the truncated basis).
OperatorMatrix sphere_multiplication(const SpectralModel& sm, int power);

struct HeatTrace {
  std::complex<double> value;
  double error_estimate = 0.0;
  bool reliable = true;
  double t_min = 0.0;  // smallest t with dim exp(-t lambda_max) <= 1e-12 Z(t)
};

/// tr(A e^{-t L}) / tr(e^{-t L}) over the truncated basis.
HeatTrace heat_state_trace(const OperatorMatrix& a, const OperatorMatrix& laplacian, double t);

/// CSV: index,eigenvalue,mode_1..mode_r,family,component.
void write_spectrum_csv(std::ostream& out, const SpectralModel& sm);
/// CSV triplets: row,col,re,im (column-major order).
void write_operator_csv(std::ostream& out, const OperatorMatrix& op);

}  // namespace helab::spectral
