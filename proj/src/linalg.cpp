#include "helab/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace helab::linalg {

namespace {

struct UnionFind {
  std::vector<Eigen::Index> parent;
  explicit UnionFind(Eigen::Index n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  }
  Eigen::Index find(Eigen::Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void join(Eigen::Index a, Eigen::Index b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

double block_norm(const Eigen::MatrixXcd& m, Eigen::Index dense_limit) {
  if (m.size() == 0) return 0.0;
  if (m.rows() <= dense_limit && m.cols() <= dense_limit) {
    if (m.rows() == 1 || m.cols() == 1) return m.norm();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()(0);
  }
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(m.cols()).normalized();
  double est = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXcd w = m.adjoint() * (m * v);
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    v = w / nw;
    const double next = std::sqrt(nw);
    if (std::abs(next - est) <= 1e-14 * next) return next;
    est = next;
  }
  return est;
}

}  // namespace

SparseC identity(Eigen::Index n) {
  SparseC id(n, n);
  id.setIdentity();
  return id;
}

SparseC diagonal(const std::vector<double>& values) {
  const Eigen::Index n = static_cast<Eigen::Index>(values.size());
  std::vector<Eigen::Triplet<cd>> t;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (values[i] != 0.0) t.emplace_back(i, i, values[i]);
  }
  SparseC d(n, n);
  d.setFromTriplets(t.begin(), t.end());
  return d;
}

SparseC from_dense(const Eigen::MatrixXcd& a, double drop) {
  std::vector<Eigen::Triplet<cd>> t;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (std::abs(a(i, j)) > drop) t.emplace_back(i, j, a(i, j));
  SparseC s(a.rows(), a.cols());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

std::vector<Block> blocks(const SparseC& a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  UnionFind uf(r + c);
  std::vector<char> used(static_cast<std::size_t>(r + c), 0);
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (SparseC::InnerIterator it(a, k); it; ++it) {
      if (it.value() == cd(0.0)) continue;
      uf.join(it.row(), r + it.col());
      used[it.row()] = used[r + it.col()] = 1;
    }
  }
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(r + c), -1);
  std::vector<Block> out;
  for (Eigen::Index i = 0; i < r + c; ++i) {
    if (!used[i]) continue;
    const Eigen::Index root = uf.find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<Eigen::Index>(out.size());
      out.emplace_back();
    }
    Block& b = out[slot[root]];
    if (i < r) {
      b.rows.push_back(i);
    } else {
      b.cols.push_back(i - r);
    }
  }
  return out;
}

std::vector<std::vector<Eigen::Index>> square_blocks(const SparseC& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("square_blocks: matrix is not square");
  const Eigen::Index n = a.rows();
  UnionFind uf(n);
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (SparseC::InnerIterator it(a, k); it; ++it) {
      if (it.value() != cd(0.0)) uf.join(it.row(), it.col());
    }
  }
  std::vector<Eigen::Index> slot(static_cast<std::size_t>(n), -1);
  std::vector<std::vector<Eigen::Index>> out;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index root = uf.find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<Eigen::Index>(out.size());
      out.emplace_back();
    }
    out[slot[root]].push_back(i);
  }
  return out;
}

Eigen::MatrixXcd extract(const SparseC& a, const std::vector<Eigen::Index>& rows,
                         const std::vector<Eigen::Index>& cols) {
  std::vector<Eigen::Index> row_pos(static_cast<std::size_t>(a.rows()), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) row_pos[rows[i]] = static_cast<Eigen::Index>(i);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows.size()),
                                              static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (SparseC::InnerIterator it(a, cols[j]); it; ++it) {
      const Eigen::Index p = row_pos[it.row()];
      if (p >= 0) m(p, static_cast<Eigen::Index>(j)) = it.value();
    }
  }
  return m;
}

double norm2(const SparseC& a, Eigen::Index dense_limit) {
  double best = 0.0;
  for (const auto& b : blocks(a)) best = std::max(best, block_norm(extract(a, b.rows, b.cols), dense_limit));
  return best;
}

SparseC hermitian_function(const SparseC& a, const std::function<double(double)>& f) {
  std::vector<Eigen::Triplet<cd>> t;
  for (const auto& idx : square_blocks(a)) {
    if (idx.size() == 1) {
      const cd v = f(a.coeff(idx[0], idx[0]).real());
      if (v != cd(0.0)) t.emplace_back(idx[0], idx[0], v);
      continue;
    }
    const Eigen::MatrixXcd m = extract(a, idx, idx);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
    Eigen::VectorXd fv(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < fv.size(); ++i) fv(i) = f(es.eigenvalues()(i));
    const Eigen::MatrixXcd r = es.eigenvectors() * fv.asDiagonal() * es.eigenvectors().adjoint();
    for (std::size_t j = 0; j < idx.size(); ++j)
      for (std::size_t i = 0; i < idx.size(); ++i)
        if (r(i, j) != cd(0.0)) t.emplace_back(idx[i], idx[j], r(i, j));
  }
  SparseC out(a.rows(), a.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

std::vector<double> hermitian_eigenvalues(const SparseC& a) {
  std::vector<double> ev;
  for (const auto& idx : square_blocks(a)) {
    if (idx.size() == 1) {
      ev.push_back(a.coeff(idx[0], idx[0]).real());
      continue;
    }
    const Eigen::MatrixXcd m = extract(a, idx, idx);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) ev.push_back(es.eigenvalues()(i));
  }
  std::sort(ev.begin(), ev.end());
  return ev;
}

SparseC pseudo_inverse(const SparseC& a, double rel_tol) {
  const auto ev = hermitian_eigenvalues(a);
  double scale = 0.0;
  for (double v : ev) scale = std::max(scale, std::abs(v));
  const double tol = rel_tol * scale;
  return hermitian_function(a, [tol](double x) { return std::abs(x) > tol ? 1.0 / x : 0.0; });
}

double hermitian_defect(const SparseC& a) {
  const SparseC d = a - SparseC(a.adjoint());
  double worst = 0.0;
  for (Eigen::Index k = 0; k < d.outerSize(); ++k)
    for (SparseC::InnerIterator it(d, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  return worst;
}

SparseC compress(const SparseC& a, const std::vector<Eigen::Index>& keep) {
  std::vector<Eigen::Index> pos(static_cast<std::size_t>(std::max(a.rows(), a.cols())), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) pos[keep[i]] = static_cast<Eigen::Index>(i);
  std::vector<Eigen::Triplet<cd>> t;
  for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
    for (SparseC::InnerIterator it(a, k); it; ++it) {
      const Eigen::Index r = pos[it.row()], c = pos[it.col()];
      if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(keep.size());
  SparseC out(n, n);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace helab::linalg
