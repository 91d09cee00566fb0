#pragma once

// Sparse complex matrices whose nonzero pattern splits into small connected
// blocks (one block per Fourier mode or degenerate cluster). Norms and
// functional calculus are computed block by block with dense solvers.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <functional>
#include <vector>

namespace helab::linalg {

using cd = std::complex<double>;
using SparseC = Eigen::SparseMatrix<cd>;

SparseC identity(Eigen::Index n);
SparseC diagonal(const std::vector<double>& values);
SparseC from_dense(const Eigen::MatrixXcd& a, double drop = 0.0);

/// Connected components of the bipartite row/column graph of the nonzero pattern.
struct Block {
  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
};
std::vector<Block> blocks(const SparseC& a);

/// Connected components of a square matrix, rows and columns identified.
std::vector<std::vector<Eigen::Index>> square_blocks(const SparseC& a);

/// Dense submatrix a[rows, cols].
Eigen::MatrixXcd extract(const SparseC& a, const std::vector<Eigen::Index>& rows,
                         const std::vector<Eigen::Index>& cols);

/// Spectral norm (largest singular value), exact per block via SVD; blocks
/// above `dense_limit` use power iteration on a^* a.
double norm2(const SparseC& a, Eigen::Index dense_limit = 800);

/// f(a) for Hermitian a, computed per connected block.
SparseC hermitian_function(const SparseC& a, const std::function<double(double)>& f);

/// Eigenvalues of Hermitian a (ascending), computed per block.
std::vector<double> hermitian_eigenvalues(const SparseC& a);

/// Moore–Penrose inverse of Hermitian a; eigenvalues below rel_tol * max|lambda| count as kernel.
SparseC pseudo_inverse(const SparseC& a, double rel_tol = 1e-10);

/// max |a_ij - a^*_ji|.
double hermitian_defect(const SparseC& a);

/// Restriction P a P to the index set `keep` (other rows/cols removed).
SparseC compress(const SparseC& a, const std::vector<Eigen::Index>& keep);

}  // namespace helab::linalg
