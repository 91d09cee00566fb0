#include "helab/spectral.hpp"

#include "helab/algebra.hpp"
#include "helab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace helab::spectral {

using geometry::ManifoldModel;
using geometry::ModelKind;
using linalg::cd;
using Triplets = std::vector<Eigen::Triplet<cd>>;

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

SparseC build(Eigen::Index rows, Eigen::Index cols, const Triplets& t) {
  SparseC m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

SparseC adj(const SparseC& a) { return SparseC(a.adjoint()); }

bool is_torus(const ManifoldModel& m) { return m.kind == ModelKind::FlatTorus; }
bool is_sphere(const ManifoldModel& m) { return m.kind == ModelKind::RoundSphere2; }

void require_supported(const ManifoldModel& model) {
  if (!is_torus(model) && !is_sphere(model)) {
    throw CapabilityError("spectral models are available for flat tori and the round sphere only, not " +
                          model.name());
  }
}

Eigen::VectorXd kappa(const ManifoldModel& model, const std::vector<int>& k) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i) v(i) = 2.0 * kPi * k[i] / model.periods[i];
  return v;
}

int spinor_dim(int n) { return 1 << (n / 2); }

// Sign of the permutation obtained by concatenating I and its complement.
int complement_sign(const std::vector<int>& idx, int n, std::vector<int>& complement) {
  complement.clear();
  for (int i = 0; i < n; ++i)
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) complement.push_back(i);
  std::vector<int> perm = idx;
  perm.insert(perm.end(), complement.begin(), complement.end());
  int inversions = 0;
  for (std::size_t a = 0; a < perm.size(); ++a)
    for (std::size_t b = a + 1; b < perm.size(); ++b)
      if (perm[a] > perm[b]) ++inversions;
  return inversions % 2 == 0 ? 1 : -1;
}

std::map<std::vector<int>, int> subset_positions(int n, int p) {
  std::map<std::vector<int>, int> pos;
  const auto basis = algebra::exterior_basis(n, p);
  for (std::size_t i = 0; i < basis.size(); ++i) pos[basis[i]] = static_cast<int>(i);
  return pos;
}

// Basis of Omega^p; empty (but well-formed) when p is outside [0, n].
SpectralModel form_basis(const ManifoldModel& model, int p, int cutoff) {
  if (p < 0 || p > model.dim) {
    SpectralModel empty;
    empty.model = model;
    empty.bundle = Bundle::forms(p);
    empty.cutoff = cutoff;
    empty.fiber_dim = 0;
    return empty;
  }
  return spectral_basis(model, Bundle::forms(p), cutoff);
}

double lambda_sphere(int l) { return static_cast<double>(l) * (l + 1); }

Eigen::MatrixXcd metric_inverse(const ManifoldModel& model, const Eigen::VectorXd& x) {
  return geometry::metric_at(model, x).inverse().cast<cd>();
}

double threshold(const std::vector<double>& ev, double rel) {
  double scale = 0.0;
  for (double v : ev) scale = std::max(scale, std::abs(v));
  return rel * scale;
}

}  // namespace

std::string Bundle::name() const {
  switch (kind) {
    case BundleKind::Functions:
      return "functions";
    case BundleKind::Forms:
      return std::to_string(degree) + "-forms";
    case BundleKind::Spinors:
      return "spinors";
  }
  return "unknown";
}

Eigen::Index SpectralModel::index_of(const ModeLabel& label) const {
  const auto it = lookup.find({label.mode, label.family, label.component});
  return it == lookup.end() ? -1 : it->second;
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> SpectralModel::degeneracy_blocks() const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  Eigen::Index start = 0;
  for (Eigen::Index i = 1; i <= dim(); ++i) {
    if (i == dim() || eigenvalues[i] - eigenvalues[start] > 1e-12 * std::max(1.0, eigenvalues[start])) {
      out.emplace_back(start, i);
      start = i;
    }
  }
  return out;
}

// --- bases -----------------------------------------------------------------------------

SpectralModel spectral_basis(const ManifoldModel& model, const Bundle& bundle, int cutoff) {
  require_supported(model);
  if (cutoff < 0) throw std::invalid_argument("spectral_basis: cutoff must be nonnegative");
  const int n = model.dim;
  if (bundle.kind == BundleKind::Forms && (bundle.degree < 0 || bundle.degree > n)) {
    throw std::invalid_argument("spectral_basis: form degree out of range");
  }
  SpectralModel sm;
  sm.model = model;
  sm.bundle = bundle;
  sm.cutoff = cutoff;

  struct Entry {
    double lambda;
    ModeLabel label;
  };
  std::vector<Entry> entries;

  if (is_torus(model)) {
    int components = 1;
    if (bundle.kind == BundleKind::Forms) components = algebra::binomial(n, bundle.degree);
    if (bundle.kind == BundleKind::Spinors) components = spinor_dim(n);
    sm.fiber_dim = components;
    std::vector<int> k(n, -cutoff);
    while (true) {
      const double lambda = kappa(model, k).squaredNorm();
      for (int c = 0; c < components; ++c) entries.push_back({lambda, {k, 0, c}});
      int i = n - 1;
      while (i >= 0 && k[i] == cutoff) k[i--] = -cutoff;
      if (i < 0) break;
      ++k[i];
    }
  } else {
    if (bundle.kind == BundleKind::Spinors) throw CapabilityError("spinors on S2 are not supported");
    const int p = bundle.kind == BundleKind::Forms ? bundle.degree : 0;
    sm.fiber_dim = p == 1 ? 2 : 1;
    for (int l = (p == 1 ? 1 : 0); l <= cutoff; ++l) {
      for (int m = -l; m <= l; ++m) {
        for (int fam = 0; fam < (p == 1 ? 2 : 1); ++fam) entries.push_back({lambda_sphere(l), {{l, m}, fam, 0}});
      }
    }
  }

  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    if (a.label.mode != b.label.mode) return a.label.mode < b.label.mode;
    if (a.label.family != b.label.family) return a.label.family < b.label.family;
    return a.label.component < b.label.component;
  });
  for (const auto& e : entries) {
    sm.lookup[{e.label.mode, e.label.family, e.label.component}] = static_cast<Eigen::Index>(sm.basis.size());
    sm.basis.push_back(e.label);
    sm.eigenvalues.push_back(e.lambda);
  }
  return sm;
}

// --- Laplace-type operators ---------------------------------------------------------

std::pair<SpectralModel, OperatorMatrix> build_laplacian(const ManifoldModel& model, const Bundle& bundle,
                                                         int cutoff, double potential, double mass) {
  if (mass < 0.0) throw std::invalid_argument("build_laplacian: mass must be nonnegative");
  if (potential + mass * mass < 0.0) {
    throw std::invalid_argument("build_laplacian: V + m^2 must be nonnegative");
  }
  SpectralModel sm = spectral_basis(model, bundle, cutoff);
  sm.potential = potential;
  sm.mass = mass;
  std::vector<double> diag = sm.eigenvalues;
  for (double& v : diag) v += potential + mass * mass;
  OperatorMatrix op;
  op.matrix = linalg::diagonal(diag);
  op.order = 2;
  op.self_adjoint = true;
  op.label = "Laplacian(" + model.name() + ", " + bundle.name() + ")";
  const int m = sm.fiber_dim;
  op.symbol = SymbolField{[model, m](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
                            const cd g = xi.cast<cd>().dot(metric_inverse(model, x) * xi.cast<cd>());
                            return Eigen::MatrixXcd(g * Eigen::MatrixXcd::Identity(m, m));
                          },
                          m};
  return {std::move(sm), std::move(op)};
}

OperatorMatrix exterior_d(const ManifoldModel& model, int p, int cutoff) {
  require_supported(model);
  const int n = model.dim;
  if (p < 0 || p > n) throw std::invalid_argument("exterior_d: degree out of range");
  const SpectralModel src = form_basis(model, p, cutoff);
  const SpectralModel dst = form_basis(model, p + 1, cutoff);
  Triplets t;
  if (is_torus(model) && p < n) {
    const auto src_sets = algebra::exterior_basis(n, p);
    const auto dst_pos = subset_positions(n, p + 1);
    for (Eigen::Index j = 0; j < src.dim(); ++j) {
      const ModeLabel& lab = src.basis[j];
      const Eigen::VectorXd kap = kappa(model, lab.mode);
      const std::vector<int>& idx = src_sets[lab.component];
      for (int a = 0; a < n; ++a) {
        if (kap(a) == 0.0 || std::find(idx.begin(), idx.end(), a) != idx.end()) continue;
        int before = 0;
        for (int i : idx)
          if (i < a) ++before;
        std::vector<int> joined = idx;
        joined.insert(std::upper_bound(joined.begin(), joined.end(), a), a);
        const double sign = before % 2 == 0 ? 1.0 : -1.0;
        const Eigen::Index row = dst.index_of({lab.mode, 0, dst_pos.at(joined)});
        t.emplace_back(row, j, cd(0.0, sign * kap(a)));
      }
    }
  } else if (is_sphere(model)) {
    for (Eigen::Index j = 0; j < src.dim(); ++j) {
      const ModeLabel& lab = src.basis[j];
      const int l = lab.mode[0];
      if (l == 0) continue;
      const double root = std::sqrt(lambda_sphere(l));
      if (p == 0) t.emplace_back(dst.index_of({lab.mode, 0, 0}), j, root);
      if (p == 1 && lab.family == 1) t.emplace_back(dst.index_of({lab.mode, 0, 0}), j, -root);
    }
  }
  OperatorMatrix op;
  op.matrix = build(dst.dim(), src.dim(), t);
  op.order = 1;
  op.label = "d_" + std::to_string(p);
  return op;
}

OperatorMatrix codifferential(const ManifoldModel& model, int p, int cutoff) {
  require_supported(model);
  if (p < 0 || p > model.dim) throw std::invalid_argument("codifferential: degree out of range");
  OperatorMatrix op;
  if (p == 0) {
    op.matrix = SparseC(0, form_basis(model, 0, cutoff).dim());
  } else {
    op.matrix = adj(exterior_d(model, p - 1, cutoff).matrix);
  }
  op.order = 1;
  op.label = "delta_" + std::to_string(p);
  return op;
}

OperatorMatrix hodge_star(const ManifoldModel& model, int p, int cutoff) {
  require_supported(model);
  const int n = model.dim;
  if (p < 0 || p > n) throw std::invalid_argument("hodge_star: degree out of range");
  const SpectralModel src = form_basis(model, p, cutoff);
  const SpectralModel dst = form_basis(model, n - p, cutoff);
  Triplets t;
  if (is_torus(model)) {
    const auto src_sets = algebra::exterior_basis(n, p);
    const auto dst_pos = subset_positions(n, n - p);
    std::vector<int> comp;
    for (Eigen::Index j = 0; j < src.dim(); ++j) {
      const ModeLabel& lab = src.basis[j];
      const int sign = complement_sign(src_sets[lab.component], n, comp);
      t.emplace_back(dst.index_of({lab.mode, 0, dst_pos.at(comp)}), j, static_cast<double>(sign));
    }
  } else {
    for (Eigen::Index j = 0; j < src.dim(); ++j) {
      const ModeLabel& lab = src.basis[j];
      if (p == 1) {
        const int fam = 1 - lab.family;
        t.emplace_back(dst.index_of({lab.mode, fam, 0}), j, lab.family == 0 ? 1.0 : -1.0);
      } else {
        t.emplace_back(dst.index_of({lab.mode, 0, 0}), j, 1.0);
      }
    }
  }
  OperatorMatrix op;
  op.matrix = build(dst.dim(), src.dim(), t);
  op.order = 0;
  op.label = "star_" + std::to_string(p);
  return op;
}

HodgeProjections hodge_projections(const ManifoldModel& model, int p, int cutoff) {
  const auto [sm, lap] = build_laplacian(model, Bundle::forms(p), cutoff);
  const Eigen::Index dim = sm.dim();
  const SparseC pinv = linalg::pseudo_inverse(lap.matrix);
  const double tol = threshold(sm.eigenvalues, 1e-10);

  HodgeProjections hp;
  SparseC dd(dim, dim), ddual(dim, dim);
  if (p < model.dim) {
    const SparseC d = exterior_d(model, p, cutoff).matrix;
    dd = adj(d) * d;
  }
  if (p > 0) {
    const SparseC d = exterior_d(model, p - 1, cutoff).matrix;
    ddual = d * adj(d);
  }
  hp.P.matrix = pinv * dd;
  hp.Q.matrix = pinv * ddual;
  hp.H.matrix = linalg::hermitian_function(lap.matrix, [tol](double x) { return std::abs(x) <= tol ? 1.0 : 0.0; });
  for (auto* op : {&hp.P, &hp.Q, &hp.H}) {
    op->order = 0;
    op->self_adjoint = true;
  }
  hp.P.label = "P";
  hp.Q.label = "Q";
  hp.H.label = "H";
  return hp;
}

OperatorMatrix helicity_R(const ManifoldModel& model, int cutoff) {
  if (!is_torus(model) || model.dim != 3) throw CapabilityError("helicity_R is defined on T3 only");
  const auto [sm, lap] = build_laplacian(model, Bundle::forms(1), cutoff);
  const double tol = threshold(sm.eigenvalues, 1e-10);
  const SparseC inv_root =
      linalg::hermitian_function(lap.matrix, [tol](double x) { return x > tol ? 1.0 / std::sqrt(x) : 0.0; });
  OperatorMatrix r;
  r.matrix = inv_root * hodge_star(model, 2, cutoff).matrix * exterior_d(model, 1, cutoff).matrix;
  r.order = 0;
  r.self_adjoint = true;
  r.label = "helicity R";
  r.symbol = SymbolField{[](const Eigen::VectorXd&, const Eigen::VectorXd& xi) {
                           const Eigen::Vector3d w = xi.normalized();
                           Eigen::Matrix3cd m;
                           m << 0, -w(2), w(1), w(2), 0, -w(0), -w(1), w(0), 0;
                           return Eigen::MatrixXcd(cd(0.0, 1.0) * m);
                         },
                         3};
  return r;
}

OperatorMatrix reflection(const SpectralModel& sm, int axis) {
  if (!is_torus(sm.model) || sm.bundle.kind == BundleKind::Spinors) {
    throw CapabilityError("reflection: torus functions and forms only");
  }
  if (axis < 0 || axis >= sm.model.dim) throw std::invalid_argument("reflection: axis out of range");
  const auto sets = algebra::exterior_basis(sm.model.dim, sm.bundle.degree);
  Triplets t;
  for (Eigen::Index j = 0; j < sm.dim(); ++j) {
    ModeLabel lab = sm.basis[j];
    const auto& idx = sets[lab.component];
    const double sign = std::find(idx.begin(), idx.end(), axis) != idx.end() ? -1.0 : 1.0;
    lab.mode[axis] = -lab.mode[axis];
    t.emplace_back(sm.index_of(lab), j, sign);
  }
  OperatorMatrix op;
  op.matrix = build(sm.dim(), sm.dim(), t);
  op.order = 0;
  op.self_adjoint = true;
  op.label = "reflection x" + std::to_string(axis + 1);
  return op;
}

// --- Dirac ------------------------------------------------------------------------------

std::pair<SpectralModel, OperatorMatrix> build_dirac(const ManifoldModel& model, int cutoff) {
  if (!is_torus(model)) throw CapabilityError("build_dirac: flat tori only, not " + model.name());
  SpectralModel sm = spectral_basis(model, Bundle::spinors(), cutoff);
  const algebra::CliffordModel cl = algebra::build_clifford(model.dim);
  const int s = cl.module_dim();
  Triplets t;
  for (Eigen::Index j = 0; j < sm.dim(); ++j) {
    const ModeLabel& lab = sm.basis[j];
    if (lab.component != 0) continue;
    const Eigen::MatrixXcd block = algebra::clifford_mult(cl, kappa(model, lab.mode));
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) {
        if (block(a, b) == cd(0.0)) continue;
        t.emplace_back(sm.index_of({lab.mode, 0, a}), sm.index_of({lab.mode, 0, b}), block(a, b));
      }
    }
  }
  OperatorMatrix op;
  op.matrix = build(sm.dim(), sm.dim(), t);
  op.order = 1;
  op.self_adjoint = true;
  op.label = "Dirac(" + model.name() + ")";
  op.symbol = SymbolField{[cl](const Eigen::VectorXd&, const Eigen::VectorXd& xi) {
                            return algebra::clifford_mult(cl, xi);
                          },
                          s};
  return {std::move(sm), std::move(op)};
}

SignDecomposition sign_and_halves(const OperatorMatrix& dirac) {
  if (linalg::hermitian_defect(dirac.matrix) > 1e-12) {
    throw std::invalid_argument("sign_and_halves: operator is not self-adjoint");
  }
  const double tol = std::max(threshold(linalg::hermitian_eigenvalues(dirac.matrix), 1e-12), 1e-300);
  auto make = [&](const std::function<double(double)>& f, const std::string& label) {
    OperatorMatrix op;
    op.matrix = linalg::hermitian_function(dirac.matrix, f);
    op.order = 0;
    op.self_adjoint = true;
    op.label = label + "(" + dirac.label + ")";
    return op;
  };
  SignDecomposition out;
  out.sign = make([tol](double x) { return std::abs(x) <= tol ? 0.0 : (x > 0 ? 1.0 : -1.0); }, "sign");
  out.plus = make([tol](double x) { return x > tol ? 1.0 : 0.0; }, "P+");
  out.minus = make([tol](double x) { return x < -tol ? 1.0 : 0.0; }, "P-");
  out.abs = make([](double x) { return std::abs(x); }, "abs");
  out.abs.order = dirac.order;
  out.kernel = make([tol](double x) { return std::abs(x) <= tol ? 1.0 : 0.0; }, "ker");
  double trace = 0.0;
  for (Eigen::Index i = 0; i < out.kernel.matrix.rows(); ++i) trace += out.kernel.matrix.coeff(i, i).real();
  out.kernel_dim = static_cast<int>(std::lround(trace));
  if (dirac.symbol) {
    const SymbolField s = *dirac.symbol;
    out.sign.symbol = SymbolField{[s](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
                                    return s(x, xi / xi.norm());
                                  },
                                  s.fiber_dim};
  }
  return out;
}

// --- symbols and quantization ----------------------------------------------------------

TorusSymbol TorusSymbol::constant(int dim, cd c) {
  TorusSymbol a;
  a.dim = dim;
  a.periods.assign(dim, 2.0 * kPi);
  a.terms.push_back({std::vector<int>(dim, 0), [c](const Eigen::VectorXd&) { return c; }});
  a.description = "constant";
  return a;
}

TorusSymbol TorusSymbol::cos_x(int dim, int axis, int frequency) {
  if (axis < 0 || axis >= dim) throw std::invalid_argument("cos_x: axis out of range");
  TorusSymbol a;
  a.dim = dim;
  a.periods.assign(dim, 2.0 * kPi);
  std::vector<int> m(dim, 0);
  m[axis] = frequency;
  a.terms.push_back({m, [](const Eigen::VectorXd&) { return cd(0.5); }});
  m[axis] = -frequency;
  a.terms.push_back({m, [](const Eigen::VectorXd&) { return cd(0.5); }});
  a.description = "cos(" + (frequency == 1 ? std::string() : std::to_string(frequency)) + "x" +
                  std::to_string(axis + 1) + ")";
  return a;
}

TorusSymbol TorusSymbol::direction(int dim, std::function<cd(const Eigen::VectorXd&)> f, std::string description) {
  TorusSymbol a;
  a.dim = dim;
  a.periods.assign(dim, 2.0 * kPi);
  a.terms.push_back({std::vector<int>(dim, 0), std::move(f)});
  a.description = std::move(description);
  return a;
}

TorusSymbol TorusSymbol::multiply(const TorusSymbol& a, const TorusSymbol& b) {
  if (a.dim != b.dim || a.periods != b.periods) throw std::invalid_argument("TorusSymbol::multiply: mismatch");
  TorusSymbol c;
  c.dim = a.dim;
  c.periods = a.periods;
  for (const auto& ta : a.terms) {
    for (const auto& tb : b.terms) {
      std::vector<int> m(a.dim);
      for (int i = 0; i < a.dim; ++i) m[i] = ta.mode[i] + tb.mode[i];
      c.terms.push_back({m, [fa = ta.coefficient, fb = tb.coefficient](const Eigen::VectorXd& w) {
                           return fa(w) * fb(w);
                         }});
    }
  }
  c.description = a.description + " * " + b.description;
  return c;
}

TorusSymbol TorusSymbol::flowed(double t) const {
  TorusSymbol out = *this;
  for (auto& term : out.terms) {
    Eigen::VectorXd k(dim);
    for (int i = 0; i < dim; ++i) k(i) = 2.0 * kPi * term.mode[i] / periods[i];
    term.coefficient = [f = term.coefficient, k, t](const Eigen::VectorXd& w) {
      return f(w) * std::exp(cd(0.0, t * k.dot(w)));
    };
  }
  out.description = description + " o G_" + fmt(t);
  return out;
}

TorusSymbol TorusSymbol::conjugate() const {
  TorusSymbol out = *this;
  for (auto& term : out.terms) {
    for (int& v : term.mode) v = -v;
    term.coefficient = [f = term.coefficient](const Eigen::VectorXd& w) { return std::conj(f(w)); };
  }
  out.description = "conj(" + description + ")";
  return out;
}

SymbolField TorusSymbol::field() const {
  const TorusSymbol self = *this;
  return SymbolField{[self](const Eigen::VectorXd& x, const Eigen::VectorXd& xi) {
                       const double nx = xi.norm();
                       if (!(nx > 0.0)) throw std::domain_error("symbol evaluated at the zero covector");
                       const Eigen::VectorXd w = xi / nx;
                       cd total = 0.0;
                       for (const auto& term : self.terms) {
                         double phase = 0.0;
                         for (int i = 0; i < self.dim; ++i) phase += 2.0 * kPi * term.mode[i] / self.periods[i] * x(i);
                         total += term.coefficient(w) * std::exp(cd(0.0, phase));
                       }
                       Eigen::MatrixXcd m(1, 1);
                       m(0, 0) = total;
                       return m;
                     },
                     1};
}

OperatorMatrix quantize(const SpectralModel& sm, const TorusSymbol& a) {
  if (!is_torus(sm.model) || sm.bundle.kind != BundleKind::Functions) {
    throw CapabilityError("quantize: torus functions only");
  }
  if (a.dim != sm.model.dim || a.periods.size() != sm.model.periods.size()) {
    throw std::invalid_argument("quantize: symbol dimension does not match the torus");
  }
  for (std::size_t i = 0; i < a.periods.size(); ++i) {
    if (std::abs(a.periods[i] - sm.model.periods[i]) > 1e-12) throw std::invalid_argument("quantize: period mismatch");
  }
  for (const auto& term : a.terms) {
    if (static_cast<int>(term.mode.size()) != a.dim || !term.coefficient) {
      throw std::invalid_argument("quantize: malformed symbol term");
    }
  }
  Triplets t;
  for (Eigen::Index j = 0; j < sm.dim(); ++j) {
    const auto& k = sm.basis[j].mode;
    const Eigen::VectorXd kap = kappa(sm.model, k);
    if (kap.norm() == 0.0) continue;
    const Eigen::VectorXd w = kap.normalized();
    for (const auto& term : a.terms) {
      std::vector<int> target(k.size());
      bool zero = true;
      for (std::size_t i = 0; i < k.size(); ++i) {
        target[i] = k[i] + term.mode[i];
        zero = zero && target[i] == 0;
      }
      if (zero) continue;
      const Eigen::Index row = sm.index_of({target, 0, 0});
      if (row < 0) continue;
      const cd c = term.coefficient(w);
      if (c != cd(0.0)) t.emplace_back(row, j, c);
    }
  }
  OperatorMatrix op;
  op.matrix = build(sm.dim(), sm.dim(), t);
  op.order = 0;
  op.label = "Op(" + a.description + ")";
  op.symbol = a.field();
  return op;
}

OperatorMatrix sphere_multiplication(const SpectralModel& sm, int power) {
  if (!is_sphere(sm.model) || sm.bundle.kind != BundleKind::Functions) {
    throw CapabilityError("sphere_multiplication: sphere functions only");
  }
  if (power < 0) throw std::invalid_argument("sphere_multiplication: power must be nonnegative");
  const int lmax = sm.cutoff + power;
  auto flat = [](int l, int m) { return static_cast<Eigen::Index>(l * l + l + m); };
  auto coef = [](int l, int m) {
    return std::sqrt(static_cast<double>((l + 1) * (l + 1) - m * m) / ((2.0 * l + 1) * (2.0 * l + 3)));
  };
  const Eigen::Index big = flat(lmax, lmax) + 1;
  Triplets t;
  for (int l = 0; l <= lmax; ++l) {
    for (int m = -l; m <= l; ++m) {
      if (l + 1 <= lmax) t.emplace_back(flat(l + 1, m), flat(l, m), coef(l, m));
      if (l >= 1 && std::abs(m) <= l - 1) t.emplace_back(flat(l - 1, m), flat(l, m), coef(l - 1, m));
    }
  }
  const SparseC z = build(big, big, t);
  SparseC zp = linalg::identity(big);
  for (int i = 0; i < power; ++i) zp = SparseC(z * zp);
  std::vector<Eigen::Index> keep;
  for (const auto& lab : sm.basis) keep.push_back(flat(lab.mode[0], lab.mode[1]));
  OperatorMatrix op;
  op.matrix = linalg::compress(zp, keep);
  op.order = 0;
  op.self_adjoint = true;
  op.label = "z^" + std::to_string(power);
  op.symbol = SymbolField{[power](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
                            Eigen::MatrixXcd m(1, 1);
                            m(0, 0) = std::pow(std::cos(x(0)), power);
                            return m;
                          },
                          1};
  return op;
}

// --- heat state ------------------------------------------------------------------------

HeatTrace heat_state_trace(const OperatorMatrix& a, const OperatorMatrix& laplacian, double t) {
  if (a.matrix.rows() != laplacian.matrix.rows() || a.matrix.cols() != laplacian.matrix.cols()) {
    throw std::invalid_argument("heat_state_trace: operator sizes differ");
  }
  if (!(t > 0.0)) throw std::invalid_argument("heat_state_trace: t must be positive");
  const auto ev = linalg::hermitian_eigenvalues(laplacian.matrix);
  const double lmin = ev.front(), lmax = ev.back();
  const double dim = static_cast<double>(ev.size());
  // dim exp(-s lmax) / Z(s), with both factors shifted by lmin to avoid overflow.
  auto ratio = [&](double s) {
    double z = 0.0;
    for (double v : ev) z += std::exp(-s * (v - lmin));
    return dim * std::exp(-s * (lmax - lmin)) / z;
  };
  HeatTrace out;
  double hi = 1.0;
  while (ratio(hi) > 1e-12 && hi < 1e12) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ratio(mid) > 1e-12 ? lo : hi) = mid;
  }
  out.t_min = hi;
  const double r = ratio(t);
  out.reliable = r <= 1e-12;

  const SparseC heat = linalg::hermitian_function(laplacian.matrix, [t, lmin](double x) {
    return std::exp(-t * (x - lmin));
  });
  cd num = 0.0;
  double z = 0.0;
  const SparseC prod = a.matrix * heat;
  for (Eigen::Index i = 0; i < heat.rows(); ++i) {
    num += prod.coeff(i, i);
    z += heat.coeff(i, i).real();
  }
  out.value = num / z;
  double row_bound = 0.0;
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(a.matrix.rows());
  for (Eigen::Index k = 0; k < a.matrix.outerSize(); ++k)
    for (SparseC::InnerIterator it(a.matrix, k); it; ++it) rows(it.row()) += std::abs(it.value());
  if (rows.size() > 0) row_bound = rows.maxCoeff();
  out.error_estimate = row_bound * r;
  return out;
}

// --- export ------------------------------------------------------------------------------

void write_spectrum_csv(std::ostream& out, const SpectralModel& sm) {
  const std::size_t r = sm.basis.empty() ? 0 : sm.basis.front().mode.size();
  out << "index,eigenvalue";
  for (std::size_t i = 0; i < r; ++i) out << ",mode_" << i + 1;
  out << ",family,component\n";
  for (Eigen::Index j = 0; j < sm.dim(); ++j) {
    out << j << ',' << fmt(sm.eigenvalues[j]);
    for (int v : sm.basis[j].mode) out << ',' << v;
    out << ',' << sm.basis[j].family << ',' << sm.basis[j].component << '\n';
  }
}

void write_operator_csv(std::ostream& out, const OperatorMatrix& op) {
  out << "row,col,re,im\n";
  for (Eigen::Index k = 0; k < op.matrix.outerSize(); ++k) {
    for (SparseC::InnerIterator it(op.matrix, k); it; ++it) {
      out << it.row() << ',' << it.col() << ',' << fmt(it.value().real()) << ',' << fmt(it.value().imag()) << '\n';
    }
  }
}

}  // namespace helab::spectral
