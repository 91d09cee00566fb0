#pragma once

// Representations of SO(n) and of the stabilizer SO(n-1) of the first basis
// vector, complex Clifford modules, and decomposition of a representation into
// invariant subspaces by Haar averaging.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace helab::algebra {

struct CliffordModel {
  int n = 0;
  std::vector<Eigen::MatrixXcd> gammas;  // Hermitian, size 2^floor(n/2)

  int module_dim() const { return gammas.empty() ? 0 : static_cast<int>(gammas.front().rows()); }
};

/// Jordan–Wigner tensor construction; entries lie in {0, ±1, ±i}. Valid for 2 <= n <= 6.
CliffordModel build_clifford(int n);

/// Clifford multiplication by xi: sum_i xi_i gamma_i.
Eigen::MatrixXcd clifford_mult(const CliffordModel& cl, const Eigen::VectorXd& xi);

/// Spin lift S of an n x n rotation R with S gamma(v) S^{-1} = gamma(R v), from
/// the principal logarithm of R. Defined up to sign.
Eigen::MatrixXcd spin_lift(const CliffordModel& cl, const Eigen::MatrixXd& rotation);

enum class GroupKind { SpecialOrthogonal, Stabilizer };

struct GroupSample {
  Eigen::MatrixXd element;  // n x n orthogonal; block-diag(1, h) for the stabilizer
  Eigen::MatrixXcd matrix;  // representing unitary
  double weight = 0.0;
};

using RepresentationMap = std::function<Eigen::MatrixXcd(const Eigen::MatrixXd&)>;

struct RepresentationTable {
  GroupKind group = GroupKind::SpecialOrthogonal;
  int ambient_dim = 0;  // n
  int degree = 0;       // k
  bool projective = false;
  std::string label;
  RepresentationMap map;  // evaluates the representation on n x n rotations
  std::vector<GroupSample> samples;

  /// Dimension of the group acting (n for SO(n), n-1 for the stabilizer).
  int group_dim() const { return group == GroupKind::SpecialOrthogonal ? ambient_dim : ambient_dim - 1; }
};

struct HaarNode {
  Eigen::MatrixXd element;
  double weight;
};

/// Haar quadrature on SO(m), 1 <= m <= 4. SO(2): 64-point trapezoid; SO(3):
/// ZYZ Euler angles, Gauss–Legendre in cos(beta) with 16^3 nodes; SO(4): pairs of
/// unit quaternions from SU(2) Euler grids. Exact on the low-degree matrix
/// coefficients used here.
std::vector<HaarNode> haar_quadrature(int m);

/// Seeded Haar-random rotations (QR of a Gaussian matrix), equal weights.
std::vector<HaarNode> haar_random(int m, int count, std::uint64_t seed);

/// p-th exterior power of an n x n matrix in the basis of sorted index subsets.
Eigen::MatrixXcd exterior_power(const Eigen::MatrixXd& g, int p);
/// Sorted p-subsets of {0, ..., n-1} in the basis order used by exterior_power.
std::vector<std::vector<int>> exterior_basis(int n, int p);

/// SO(n) acting on Λ^p C^n; the table carries a seeded random sample of SO(n).
RepresentationTable exterior_rep(int n, int p, int sample_count = 32, std::uint64_t seed = 7);

/// Restriction to SO(n-1) = {block-diag(1, h)} using the Haar quadrature of SO(n-1).
RepresentationTable restrict_to_stabilizer(const RepresentationTable& rep);

struct IsotypicProjection {
  Eigen::MatrixXcd projector;
  int dimension = 0;
  int label = 0;
};

/// Splits C^k into irreducible invariant subspaces: Haar-average a seeded
/// generic Hermitian matrix over the sampled group and cluster its spectrum.
/// Throws ResolutionError if the averaged operator fails to commute with the
/// sample (quadrature too coarse).
std::vector<IsotypicProjection> isotypic_projections(const RepresentationTable& rep, std::uint64_t seed = 11,
                                                     double relative_gap = 1e-6);

/// Max over samples and projections of ||[p_i, rho(g)]||.
double commutant_residual(const RepresentationTable& rep, const std::vector<IsotypicProjection>& projections);

/// Stabilizer SO(n-1) acting on the Clifford module through spin lifts
/// (projective); the induced action on End is tau(g) x = rho(g)^{-1} x rho(g).
RepresentationTable conjugation_rep(const CliffordModel& cl);

/// tau(g)(x) = rho(g)^{-1} x rho(g).
Eigen::MatrixXcd conjugation_action(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& x);

/// Branching of Λ^p C^n to SO(n-1): components found numerically, plus a
/// character check that they can be grouped into Λ^p C^{n-1} ⊕ Λ^{p-1} C^{n-1}.
struct BranchingReport {
  int n = 0;
  int p = 0;
  std::vector<int> ranks;
  std::vector<int> group_of_component;  // 0 -> Λ^p C^{n-1}, 1 -> Λ^{p-1} C^{n-1}
  int rank_upper = 0;                   // sum of ranks assigned to Λ^p C^{n-1}
  int rank_lower = 0;                   // sum of ranks assigned to Λ^{p-1} C^{n-1}
  bool split_matches = false;
  double identity_residual = 0.0;   // ||sum p_i - I||
  double commutant_residual = 0.0;  // max ||[p_i, rho(g)]||
  double character_residual = 0.0;  // best grouping's character mismatch
  std::vector<IsotypicProjection> projections;
};
BranchingReport branching(int n, int p);

/// Binomial coefficient.
int binomial(int n, int k);

}  // namespace helab::algebra
