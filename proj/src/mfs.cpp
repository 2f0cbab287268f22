#include "mfstune/mfs.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "mfstune/errors.hpp"

namespace mfstune {

double kernel(const Vec3& p, const Vec3& xi) {
  const double r = (p - xi).norm();
  if (r == 0.0) throw SingularityError("kernel evaluated at its centre");
  return 1.0 / r;
}

double kernel_normal_derivative(const Vec3& p, const Vec3& xi, const Vec3& n) {
  const Vec3 d = p - xi;
  const double r = d.norm();
  if (r == 0.0) throw SingularityError("kernel derivative evaluated at its centre");
  return -n.dot(d) / (r * r * r);
}

PrimaryField dipole_primary(const HeadModel& head, const Dipole& dipole, const Vec3& p) {
  const Vec3 d = p - dipole.position;
  const double r = d.norm();
  if (r == 0.0) throw SingularityError("dipole field evaluated at the dipole position");
  const double scale = 1.0 / (4.0 * std::numbers::pi * head.sigma_brain);
  const double r3 = r * r * r;
  const double qd = dipole.moment.dot(d);
  PrimaryField out;
  out.potential = scale * qd / r3;
  out.gradient = scale * (dipole.moment / r3 - 3.0 * qd * d / (r3 * r * r));
  return out;
}

namespace {

// Writes one block of kernel (or kernel-derivative) values, scaled by
// `weight`, into rows [row0, row0 + points) and the columns of `centers`.
void fill_potential(Eigen::MatrixXd& a, Eigen::Index row0, const PointSet& points,
                    const PointSet& centers, Eigen::Index col0, double weight) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < centers.size(); ++j) {
      a(row0 + static_cast<Eigen::Index>(i), col0 + static_cast<Eigen::Index>(j)) =
          weight * kernel(points.points[i], centers.points[j]);
    }
  }
}

void fill_flux(Eigen::MatrixXd& a, Eigen::Index row0, const PointSet& points,
               const PointSet& centers, Eigen::Index col0, double weight) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 normal = points.points[i].normalized();
    for (std::size_t j = 0; j < centers.size(); ++j) {
      a(row0 + static_cast<Eigen::Index>(i), col0 + static_cast<Eigen::Index>(j)) =
          weight * kernel_normal_derivative(points.points[i], centers.points[j], normal);
    }
  }
}

}  // namespace

MfsSystem assemble(const ThetaVector& theta, const HeadModel& head, const MfsOptions& options) {
  head.validate();
  if (options.n_colloc < 2) throw InvalidArgument("n_colloc must be >= 2");

  MfsSystem sys;
  sys.head = head;
  sys.centers = build_center_sets(theta, head, options.counts, options.geom_margin);
  sys.colloc_scalp = spiral_points(options.n_colloc, head.r_scalp);
  sys.colloc_skull = spiral_points(options.n_colloc, head.r_skull);
  sys.colloc_brain = spiral_points(options.n_colloc, head.r_brain);
  sys.flux_scale = options.balance_rows ? head.r_scalp : 1.0;

  const auto m = static_cast<Eigen::Index>(options.n_colloc);
  for (int b = 0; b < kRowBlocks; ++b) sys.rows[static_cast<std::size_t>(b)] = {b * m, m};
  const PointSet* sets[] = {&sys.centers.scalp_outer, &sys.centers.scalp_inner,
                            &sys.centers.skull_outer, &sys.centers.skull_inner,
                            &sys.centers.brain_outer};
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < kThetaDim; ++k) {
    sys.cols[k] = {offset, static_cast<Eigen::Index>(sets[k]->size())};
    offset += sys.cols[k].size;
  }

  sys.matrix = Eigen::MatrixXd::Zero(kRowBlocks * m, offset);
  auto& a = sys.matrix;
  const double fs = sys.flux_scale;
  const auto row = [&](RowBlock b) { return sys.rows[static_cast<std::size_t>(b)].offset; };
  const auto col = [&](std::size_t k) { return sys.cols[k].offset; };

  // Scalp layer (columns 0, 1), skull layer (2, 3), brain layer (4).
  for (std::size_t k : {0u, 1u}) {
    fill_flux(a, row(RowBlock::scalp_flux), sys.colloc_scalp, *sets[k], col(k),
              fs * head.sigma_scalp);
    fill_potential(a, row(RowBlock::skull_potential), sys.colloc_skull, *sets[k], col(k), 1.0);
    fill_flux(a, row(RowBlock::skull_flux), sys.colloc_skull, *sets[k], col(k),
              fs * head.sigma_scalp);
  }
  for (std::size_t k : {2u, 3u}) {
    fill_potential(a, row(RowBlock::skull_potential), sys.colloc_skull, *sets[k], col(k), -1.0);
    fill_flux(a, row(RowBlock::skull_flux), sys.colloc_skull, *sets[k], col(k),
              -fs * head.sigma_skull);
    fill_potential(a, row(RowBlock::brain_potential), sys.colloc_brain, *sets[k], col(k), 1.0);
    fill_flux(a, row(RowBlock::brain_flux), sys.colloc_brain, *sets[k], col(k),
              fs * head.sigma_skull);
  }
  fill_potential(a, row(RowBlock::brain_potential), sys.colloc_brain, *sets[4], col(4), -1.0);
  fill_flux(a, row(RowBlock::brain_flux), sys.colloc_brain, *sets[4], col(4),
            -fs * head.sigma_brain);
  return sys;
}

Eigen::VectorXd build_rhs(const MfsSystem& system, const Dipole& dipole) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(system.matrix.rows());
  const auto pot = system.rows[static_cast<std::size_t>(RowBlock::brain_potential)];
  const auto flux = system.rows[static_cast<std::size_t>(RowBlock::brain_flux)];
  const double flux_weight = system.flux_scale * system.head.sigma_brain;
  for (std::size_t i = 0; i < system.colloc_brain.size(); ++i) {
    const Vec3& p = system.colloc_brain.points[i];
    const PrimaryField f = dipole_primary(system.head, dipole, p);
    const auto ii = static_cast<Eigen::Index>(i);
    b[pot.offset + ii] = f.potential;
    b[flux.offset + ii] = flux_weight * f.gradient.dot(p.normalized());
  }
  return b;
}

MfsSolver::MfsSolver(MfsSystem system, const MfsOptions& options)
    : system_(std::make_shared<const MfsSystem>(std::move(system))),
      require_full_rank_(options.require_full_rank) {
  const Eigen::MatrixXd& a = system_->matrix;
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (m == 0 || n == 0) throw InvalidArgument("empty collocation system");

  Eigen::MatrixXd core;
  if (m >= n) {
    qr_.emplace(a);
    core = qr_->matrixQR().topRows(n).triangularView<Eigen::Upper>();
  } else {
    core = a;
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  sv_ = svd.singularValues();
  u_ = svd.matrixU();
  v_ = svd.matrixV();
  if (!sv_.allFinite()) throw NumericalError("singular value decomposition did not converge");

  sigma_max_ = sv_.size() > 0 ? sv_[0] : 0.0;
  sigma_min_ = sv_.size() > 0 ? sv_[sv_.size() - 1] : 0.0;
  const double rank_tol = options.rank_tol > 0.0
                              ? options.rank_tol
                              : std::numeric_limits<double>::epsilon() *
                                    static_cast<double>(std::max(m, n));
  for (Eigen::Index i = 0; i < sv_.size(); ++i) {
    if (sv_[i] > rank_tol * sigma_max_) ++rank_;
    if (sv_[i] > options.svd_tol * sigma_max_) ++kept_;
  }
}

SolveOutcome MfsSolver::solve(const Dipole& dipole) const {
  if (!usable()) return failure();
  const Eigen::VectorXd b = build_rhs(*system_, dipole);
  Eigen::VectorXd qtb = b;
  if (qr_) {
    qtb.applyOnTheLeft(qr_->householderQ().transpose());
    qtb.conservativeResize(columns());
  }
  Eigen::VectorXd utb = u_.leftCols(kept_).transpose() * qtb;
  utb.array() /= sv_.head(kept_).array();
  MfsSolution sol;
  sol.coefficients = v_.leftCols(kept_) * utb;
  sol.system = system_;
  sol.rank = rank_;
  sol.sigma_max = sigma_max_;
  sol.sigma_min = sigma_min_;
  sol.rhs_norm = b.norm();
  sol.residual_norm = (system_->matrix * sol.coefficients - b).norm();
  return sol;
}

SolveOutcome solve(const MfsSystem& system, const Dipole& dipole, const MfsOptions& options) {
  return MfsSolver(system, options).solve(dipole);
}

ScalpOperator::ScalpOperator(const MfsSystem& system, const PointSet& test) {
  const PointSet* sets[] = {&system.centers.scalp_outer, &system.centers.scalp_inner};
  offset_ = system.cols[0].offset;
  const Eigen::Index width = system.cols[0].size + system.cols[1].size;
  if (system.cols[1].offset != offset_ + system.cols[0].size) {
    throw InvalidArgument("scalp centre columns are not contiguous");
  }
  matrix_.resize(static_cast<Eigen::Index>(test.size()), width);
  Eigen::Index col = 0;
  for (const PointSet* set : sets) {
    for (const Vec3& c : set->points) {
      for (std::size_t i = 0; i < test.size(); ++i) {
        matrix_(static_cast<Eigen::Index>(i), col) = kernel(test.points[i], c);
      }
      ++col;
    }
  }
}

ScalpField ScalpOperator::apply(const MfsSolution& solution) const {
  if (solution.coefficients.size() < offset_ + matrix_.cols()) {
    throw InvalidArgument("solution does not match the scalp operator");
  }
  const Eigen::VectorXd v = matrix_ * solution.coefficients.segment(offset_, matrix_.cols());
  return {std::vector<double>(v.data(), v.data() + v.size())};
}

ScalpField evaluate_scalp(const MfsSolution& solution, const PointSet& test) {
  if (!solution.system) throw InvalidArgument("solution has no system");
  const MfsSystem& sys = *solution.system;
  ScalpField out;
  out.values.assign(test.size(), 0.0);
  const PointSet* sets[] = {&sys.centers.scalp_outer, &sys.centers.scalp_inner};
  for (std::size_t k = 0; k < 2; ++k) {
    const Eigen::Index offset = sys.cols[k].offset;
    for (std::size_t i = 0; i < test.size(); ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < sets[k]->size(); ++j) {
        acc += solution.coefficients[offset + static_cast<Eigen::Index>(j)] *
               kernel(test.points[i], sets[k]->points[j]);
      }
      out.values[i] += acc;
    }
  }
  return out;
}

QualityScore quality_q(const ScalpField& u_mfs, const ScalpField& u_true,
                       const MetricOptions& options) {
  if (u_mfs.size() != u_true.size()) {
    throw InvalidArgument("quality_q requires fields of equal length");
  }
  if (u_true.size() == 0) throw UndefinedMetric("quality_q on empty fields");
  double mean_mfs = 0.0, mean_true = 0.0;
  if (options.common_average_reference) {
    for (std::size_t k = 0; k < u_true.size(); ++k) {
      mean_mfs += u_mfs.values[k];
      mean_true += u_true.values[k];
    }
    mean_mfs /= static_cast<double>(u_true.size());
    mean_true /= static_cast<double>(u_true.size());
  }
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < u_true.size(); ++k) {
    const double t = u_true.values[k] - mean_true;
    const double diff = (u_mfs.values[k] - mean_mfs) - t;
    num += diff * diff;
    den += t * t;
  }
  if (!(den > 0.0)) throw UndefinedMetric("reference field is identically zero");
  if (!std::isfinite(num)) throw NumericalError("MFS field is not finite");
  if (num == 0.0) return {options.q_cap, true};
  const double ratio = num / den;
  const double q = options.log_base == LogBase::ten ? -std::log10(ratio) : -std::log(ratio);
  return {q, false};
}

ForwardModel::ForwardModel(HeadModel head, MfsOptions options, PointSet test, double oracle_tol,
                           int oracle_max_degree, MetricOptions metric)
    : head_(head),
      options_(options),
      test_(std::move(test)),
      oracle_tol_(oracle_tol),
      oracle_max_degree_(oracle_max_degree),
      metric_(metric) {
  head_.validate();
}

bool ForwardModel::prepare(const ThetaVector& theta) {
  if (solver_ && prepared_ == theta) return solver_->usable();
  solver_.reset();
  scalp_.reset();
  solver_ = std::make_unique<MfsSolver>(assemble(theta, head_, options_), options_);
  if (solver_->usable()) scalp_ = std::make_unique<ScalpOperator>(solver_->system(), test_);
  prepared_ = theta;
  return solver_->usable();
}

const MfsSolver& ForwardModel::solver() const {
  if (!solver_) throw InvalidArgument("forward model has not been prepared");
  return *solver_;
}

ForwardReport ForwardModel::evaluate(const Dipole& dipole) const {
  const MfsSolver& s = solver();
  SolveOutcome outcome = s.solve(dipole);
  if (std::holds_alternative<RankFailure>(outcome)) {
    throw NumericalError("evaluate called on a rank-deficient system");
  }
  const auto& sol = std::get<MfsSolution>(outcome);
  const ScalpField u_mfs = scalp_->apply(sol);
  const SeriesField truth = layered_potential(head_, dipole, test_, oracle_tol_, oracle_max_degree_);
  ForwardReport r;
  r.quality = quality_q(u_mfs, truth.field, metric_);
  r.rank = sol.rank;
  r.columns = s.columns();
  r.residual_norm = sol.residual_norm;
  r.rhs_norm = sol.rhs_norm;
  r.sigma_max = sol.sigma_max;
  r.sigma_min = sol.sigma_min;
  r.oracle_degrees = truth.degrees;
  return r;
}

std::variant<ForwardReport, RankFailure> forward_quality(const ThetaVector& theta,
                                                         const HeadModel& head,
                                                         const MfsOptions& options,
                                                         const Dipole& dipole,
                                                         const PointSet& test,
                                                         double oracle_tol,
                                                         const MetricOptions& metric) {
  ForwardModel model(head, options, test, oracle_tol, kDefaultMaxDegree, metric);
  if (!model.prepare(theta)) return model.solver().failure();
  return model.evaluate(dipole);
}

}  // namespace mfstune
