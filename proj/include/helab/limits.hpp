#pragma once

// States on truncated observable algebras (eigenstates, Cesàro means, heat
// states, the Liouville tracial state), their comparison along ladders, and the
// high-energy diagnostics: negative-order decay, Egorov residual, quantum
// variance and ergodic decomposition of the tracial state.

#include "helab/flows.hpp"
#include "helab/spectral.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace helab::limits {

using spectral::OperatorMatrix;
using spectral::SpectralModel;
using spectral::SymbolField;

struct StateValue {
  std::complex<double> value;
  double error_estimate = 0.0;
  bool reliable = true;
};

enum class StateKind { Eigen, Cesaro, Heat, Tracial };

struct StateFunctional {
  StateKind kind = StateKind::Eigen;
  Eigen::Index index = 0;  // eigen index j, or the effective Cesàro N
  double t = 0.0;          // heat parameter
  std::vector<double> energies;  // eigenvalues of Delta + V + m^2 in basis order
  std::string describe() const;
};

/// omega(A) = <phi_j, A phi_j> in the canonical eigenbasis.
StateFunctional eigen_state(const SpectralModel& sm, Eigen::Index j);
/// Mean of the first N eigenstates; N is rounded up to the end of its degeneracy block.
StateFunctional cesaro_state(const SpectralModel& sm, Eigen::Index n);
/// tr(A e^{-t H^2}) / tr(e^{-t H^2}) with H^2 = Delta + V + m^2.
StateFunctional heat_state(const SpectralModel& sm, double t);

/// Throws std::invalid_argument when A does not act on the state's basis.
StateValue evaluate(const StateFunctional& state, const OperatorMatrix& a);

/// Normalized Liouville quadrature of tr(sigma)/k on S^*M.
struct TracialState {
  geometry::ManifoldModel model;
  int fiber_dim = 1;
  int resolution = 0;
  std::vector<flows::LiouvilleNode> nodes;
  std::vector<flows::LiouvilleNode> coarse_nodes;  // for the error estimate
};
TracialState tracial_state(const geometry::ManifoldModel& model, int fiber_dim, int resolution);
/// Value of the tracial state; error_estimate compares against a coarser rule.
StateValue evaluate(const TracialState& omega, const SymbolField& sigma);

/// Covector g(e_1, .) of a frame point.
Eigen::VectorXd unit_covector(const geometry::ManifoldModel& model, const flows::FramePoint& fp);

/// (beta_t sigma)(x, xi) = sigma(G_{-t}(x, xi)), scalar transport of the fiber.
SymbolField flow_symbol(const geometry::ManifoldModel& model, const SymbolField& sigma, double t);

struct LadderRow {
  double parameter;  // N for Cesàro rows, t for heat rows
  std::complex<double> value;
  double gap;        // |value - tracial|
  bool reliable = true;
};

struct StateComparison {
  std::vector<LadderRow> cesaro;
  std::vector<LadderRow> heat;
  std::complex<double> tracial;
  bool cesaro_monotone = true;  // gaps shrink along the ladder, 10% slack
  bool heat_monotone = true;
};

/// Cesàro values along `n_ladder` and heat values along `t_ladder`, compared
/// with the tracial value.
StateComparison compare_states(const SpectralModel& sm, const OperatorMatrix& a, std::complex<double> tracial,
                               const std::vector<Eigen::Index>& n_ladder, const std::vector<double>& t_ladder);

/// Indices whose frequency sqrt(lambda) lies in [lambda, 2 lambda).
std::vector<Eigen::Index> frequency_shell(const SpectralModel& sm, double shell);

struct DecayRow {
  double shell;
  Eigen::Index count;
  double diagonal_max;     // max_j |<phi_j, A phi_j>| over the shell
  double compressed_norm;  // ||Pi A Pi||
};

struct DecayTable {
  std::vector<DecayRow> rows;
  std::vector<double> diagonal_ratios;
  std::vector<double> norm_ratios;
};

DecayTable negative_order_decay(const SpectralModel& sm, const OperatorMatrix& a, const std::vector<double>& shells);

/// ||Pi (U(-t) Op(a) U(t) - Op(a o G_t)) Pi|| with U(t) = exp(-i t sqrt(Delta)) on torus functions.
double egorov_residual(const SpectralModel& sm, const spectral::TorusSymbol& a, double t, double shell);

struct VarianceReport {
  std::string label;
  Eigen::Index n = 0;
  double variance = 0.0;
  std::complex<double> limit_value;
  std::vector<std::complex<double>> values;      // <phi_j, A phi_j>
  std::vector<std::complex<double>> deviations;  // values - limit_value
};

/// Variance of the first N eigenstates of Delta inside range(P) about `limit`
/// (default: their mean). Throws std::invalid_argument if ||[P, Delta]|| > 1e-10
/// or range(P) holds fewer than N eigenstates.
VarianceReport quantum_variance(const SpectralModel& sm, const OperatorMatrix& a, const OperatorMatrix& projection,
                                Eigen::Index n, std::optional<std::complex<double>> limit = std::nullopt,
                                std::string label = {});

struct ErgodicComponent {
  SymbolField projection;
  double weight = 0.0;  // omega(p_i)
  std::string label;
};

/// omega_i(.) = omega(p_i .) / omega(p_i). Throws std::invalid_argument unless
/// sum p_i = I within 1e-10 on the quadrature nodes.
std::vector<ErgodicComponent> ergodic_decomposition(const TracialState& omega,
                                                    const std::vector<SymbolField>& projections,
                                                    const std::vector<std::string>& labels = {});
StateValue component_value(const TracialState& omega, const ErgodicComponent& c, const SymbolField& a);

/// Symbol field p(x, xi) = rho(U) p rho(U)^{-1}, U the orthonormal-gauge frame
/// with first vector xi/|xi| (a p commuting with rho(SO(n-1)) makes this independent
/// of the completion).
SymbolField lift_frame_projection(const geometry::ManifoldModel& model, const Eigen::MatrixXcd& p,
                                  std::function<Eigen::MatrixXcd(const Eigen::MatrixXd&)> rho);

}  // namespace helab::limits
