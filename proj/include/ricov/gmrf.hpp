#ifndef RICOV_GMRF_HPP
#define RICOV_GMRF_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <utility>
#include <vector>

namespace ricov {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct AdjacencyGraph {
  int num_areas = 0;
  std::vector<std::pair<int, int>> edges;  // i < j, unique

  /// Normalizes edge order, drops duplicates; rejects self-loops and
  /// out-of-range endpoints.
  static AdjacencyGraph from_edges(int num_areas,
                                   std::vector<std::pair<int, int>> edges);
  /// Rook-adjacency lattice, nodes numbered row-major.
  static AdjacencyGraph lattice(int rows, int cols);

  /// Connected-component label per node (0-based, in order of first node).
  std::vector<int> component_labels() const;
  int num_components() const;
};

enum class StructureKind { kIcar, kRw2, kAr1, kIid };

const char* to_string(StructureKind kind);

struct StructureMatrix {
  StructureKind kind = StructureKind::kIid;
  SpMat Q;  // full symmetric storage, structural zeros kept
  int rank_deficiency = 0;
  std::vector<VectorXd> null_space_basis;
  double log_pdet = 0;  // log product of non-zero eigenvalues
  bool scaled = false;

  int size() const { return static_cast<int>(Q.rows()); }
  int rank() const { return size() - rank_deficiency; }
};

/// Builds ICAR (needs `graph`), RW2, AR1(rho) or IID structure of the given size.
StructureMatrix structure_matrix(StructureKind kind, int size,
                                 const AdjacencyGraph* graph = nullptr,
                                 double rho = 0.0);

/// Marginal variances of the generalized inverse restricted to the
/// complement of the null space.
VectorXd generalized_marginal_variances(const StructureMatrix& s);

/// Rescales ICAR/RW2 structures so that the geometric mean of the marginal
/// variances of the constrained generalized inverse is one. ICAR is scaled per
/// connected component; IID and AR1 are returned unchanged.
StructureMatrix scale_structured(const StructureMatrix& s,
                                 const AdjacencyGraph* graph = nullptr);

struct ConstraintVector {
  VectorXd coef;
  // False when adding c c^T to a precision would create heavy fill-in.
  bool fill_friendly = true;
};

struct InteractionStructure {
  StructureMatrix structure;
  std::vector<ConstraintVector> constraints;
};

/// Kronecker space x time precision (area-major index i*B + b) built from the
/// scaled factors, with constraints spanning the null space of the product.
InteractionStructure interaction_precision(StructureKind space_kind,
                                           StructureKind time_kind, int num_areas,
                                           int num_cohorts, const AdjacencyGraph& graph,
                                           double rho = 0.0);

/// Exponential prior on sigma calibrated by Pr(sigma > u) = alpha.
struct PcPrecisionPrior {
  double u = 1.0;
  double alpha = 0.01;
  double rate() const;
  void validate() const;
};

double pc_prior_logdensity(double sigma, const PcPrecisionPrior& prior);
/// Same prior expressed on log precision, log(tau) = -2 log(sigma).
double pc_prior_logdensity_logprec(double log_tau, const PcPrecisionPrior& prior);

/// PC prior for a lag-one correlation with base model rho = 1, calibrated by
/// Pr(rho > u0) = alpha0.
struct PcCorrelationPrior {
  double u0 = 0.7;
  double alpha0 = 0.7;
  double rate() const;
  void validate() const;
};

double pc_prior_correlation_logdensity(double rho, double u0, double alpha0);
double pc_prior_correlation_logdensity(double rho, const PcCorrelationPrior& prior);

}  // namespace ricov

#endif
