#pragma once

#include <memory>
#include <optional>
#include <variant>

#include <Eigen/Core>
#include <Eigen/QR>

#include "mfstune/geometry.hpp"
#include "mfstune/oracle.hpp"

namespace mfstune {

/// Free-space Laplace kernel 1 / |p - xi|.
double kernel(const Vec3& p, const Vec3& xi);

/// Derivative of the kernel at p along the unit vector n: -n.(p - xi) / |p - xi|^3.
double kernel_normal_derivative(const Vec3& p, const Vec3& xi, const Vec3& n);

struct PrimaryField {
  double potential = 0.0;
  Vec3 gradient = Vec3::Zero();
};

/// Free-space dipole potential in the brain conductivity, and its gradient.
PrimaryField dipole_primary(const HeadModel& head, const Dipole& dipole, const Vec3& p);

struct MfsOptions {
  CenterCounts counts{};
  std::size_t n_colloc = 300;
  // Multiply flux rows by r_scalp so they carry the same units as potential rows.
  bool balance_rows = true;
  // Singular values below svd_tol * sigma_max are truncated in the solve.
  double svd_tol = 1e-12;
  // Numerical rank threshold relative to sigma_max; <= 0 selects
  // machine epsilon * max(rows, cols).
  double rank_tol = 0.0;
  double geom_margin = kDefaultGeomMargin;
  // When false, rank-deficient systems still return the truncated
  // minimum-norm solution instead of a RankFailure.
  bool require_full_rank = true;
};

/// Row blocks in assembly order. Each spans n_colloc rows.
enum class RowBlock {
  scalp_flux,          // sigma_scalp du1/dn = 0 on the scalp
  skull_potential,     // u1 - u2 = 0 on the skull/scalp interface
  skull_flux,          // sigma_scalp du1/dn - sigma_skull du2/dn = 0
  brain_potential,     // u2 - u3 = u_p on the brain/skull interface
  brain_flux,          // sigma_skull du2/dn - sigma_brain du3/dn = sigma_brain du_p/dn
};
inline constexpr int kRowBlocks = 5;

struct BlockSpan {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
};

/// Dense collocation system for one theta. Depends only on theta and geometry.
struct MfsSystem {
  Eigen::MatrixXd matrix;
  std::array<BlockSpan, kRowBlocks> rows{};
  std::array<BlockSpan, kThetaDim> cols{};  // ordered as CenterCounts
  CenterSets centers;
  PointSet colloc_scalp;
  PointSet colloc_skull;
  PointSet colloc_brain;
  HeadModel head;
  double flux_scale = 1.0;
};

MfsSystem assemble(const ThetaVector& theta, const HeadModel& head, const MfsOptions& options);

/// Right-hand side for a dipole: nonzero only on the brain/skull rows.
Eigen::VectorXd build_rhs(const MfsSystem& system, const Dipole& dipole);

struct MfsSolution {
  Eigen::VectorXd coefficients;
  std::shared_ptr<const MfsSystem> system;
  int rank = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double residual_norm = 0.0;
  double rhs_norm = 0.0;
};

struct RankFailure {
  int rank = 0;
  int columns = 0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
};

using SolveOutcome = std::variant<MfsSolution, RankFailure>;

/// Factorizes a system once (QR followed by SVD of the triangular factor) and
/// solves it for any number of dipoles. Immutable after construction.
class MfsSolver {
 public:
  MfsSolver(MfsSystem system, const MfsOptions& options);

  bool full_rank() const { return rank_ == columns(); }
  /// Whether solve() returns solutions: full rank, or rank not required.
  bool usable() const { return full_rank() || !require_full_rank_; }
  int rank() const { return rank_; }
  int columns() const { return static_cast<int>(system_->matrix.cols()); }
  double sigma_max() const { return sigma_max_; }
  double sigma_min() const { return sigma_min_; }
  const MfsSystem& system() const { return *system_; }
  RankFailure failure() const { return {rank_, columns(), sigma_max_, sigma_min_}; }

  /// Minimum-norm truncated least-squares solve. Returns RankFailure when the
  /// matrix is numerically rank deficient.
  SolveOutcome solve(const Dipole& dipole) const;

 private:
  std::shared_ptr<const MfsSystem> system_;
  std::optional<Eigen::HouseholderQR<Eigen::MatrixXd>> qr_;  // absent when rows < cols
  Eigen::MatrixXd u_;        // left singular vectors of R
  Eigen::MatrixXd v_;        // right singular vectors of R
  Eigen::VectorXd sv_;
  int rank_ = 0;
  int kept_ = 0;
  bool require_full_rank_ = true;
  double sigma_max_ = 0.0;
  double sigma_min_ = 0.0;
};

SolveOutcome solve(const MfsSystem& system, const Dipole& dipole, const MfsOptions& options = {});

/// MFS scalp potential: sum over the scalp layer's centre sets.
ScalpField evaluate_scalp(const MfsSolution& solution, const PointSet& test);

/// evaluate_scalp as a dense kernel matrix, for many dipoles at one theta.
class ScalpOperator {
 public:
  ScalpOperator(const MfsSystem& system, const PointSet& test);
  ScalpField apply(const MfsSolution& solution) const;

 private:
  Eigen::MatrixXd matrix_;
  Eigen::Index offset_ = 0;
};

enum class LogBase { natural, ten };

struct MetricOptions {
  LogBase log_base = LogBase::natural;
  // Subtract each field's mean over the test points before comparing.
  bool common_average_reference = false;
  double q_cap = 40.0;
};

struct QualityScore {
  double q = 0.0;
  bool capped = false;
};

/// Negative log relative squared error of u_mfs against u_true.
QualityScore quality_q(const ScalpField& u_mfs, const ScalpField& u_true,
                       const MetricOptions& options = {});

struct ForwardReport {
  QualityScore quality;
  int rank = 0;
  int columns = 0;
  double residual_norm = 0.0;
  double rhs_norm = 0.0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  int oracle_degrees = 0;
};

/// Forward model for tuning: caches one factorization per theta and scores
/// dipoles against the layered-sphere oracle on a fixed test set.
class ForwardModel {
 public:
  ForwardModel(HeadModel head, MfsOptions options, PointSet test, double oracle_tol,
               int oracle_max_degree, MetricOptions metric);

  /// Assembles and factorizes for theta. Returns false on rank failure
  /// (never, if the options do not require full rank).
  bool prepare(const ThetaVector& theta);
  const MfsSolver& solver() const;

  /// Requires a successful prepare().
  ForwardReport evaluate(const Dipole& dipole) const;

  const HeadModel& head() const { return head_; }
  const PointSet& test_points() const { return test_; }

 private:
  HeadModel head_;
  MfsOptions options_;
  PointSet test_;
  double oracle_tol_;
  int oracle_max_degree_;
  MetricOptions metric_;
  std::unique_ptr<MfsSolver> solver_;
  std::unique_ptr<ScalpOperator> scalp_;
  ThetaVector prepared_{};
};

/// One-shot composition of assemble, solve, evaluate_scalp, the oracle and
/// quality_q. Returns RankFailure instead of a score for rank-deficient theta.
std::variant<ForwardReport, RankFailure> forward_quality(const ThetaVector& theta,
                                                         const HeadModel& head,
                                                         const MfsOptions& options,
                                                         const Dipole& dipole,
                                                         const PointSet& test,
                                                         double oracle_tol = kDefaultOracleTol,
                                                         const MetricOptions& metric = {});

}  // namespace mfstune
