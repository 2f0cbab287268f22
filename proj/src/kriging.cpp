#include "mfstune/kriging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mfstune/errors.hpp"

namespace mfstune {

Observation::Observation(ThetaVector t, std::vector<double> q)
    : theta(t), q_values(std::move(q)) {
  if (q_values.empty()) throw InvalidArgument("observation needs at least one value");
  double sum = 0.0;
  for (double v : q_values) sum += v;
  mean_ = sum / static_cast<double>(q_values.size());
  if (q_values.size() > 1) {
    double ss = 0.0;
    for (double v : q_values) ss += (v - mean_) * (v - mean_);
    variance_ = ss / static_cast<double>(q_values.size() - 1);
  }
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd signal_covariance(const Eigen::MatrixXd& x, const GpHyperparameters& h) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  const Eigen::ArrayXd inv_ls = h.lengthscales.array().inverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = h.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = ((x.row(i) - x.row(j)).transpose().array() * inv_ls).square().sum();
      k(i, j) = k(j, i) = h.signal_variance * std::exp(-0.5 * r2);
    }
  }
  return k;
}

// Cholesky of signal + noise with escalating jitter. Returns false if the
// matrix stays indefinite.
bool robust_llt(Eigen::MatrixXd k, const Eigen::VectorXd& noise, double jitter,
                Eigen::LLT<Eigen::MatrixXd>& llt) {
  k.diagonal() += noise;
  for (int attempt = 0; attempt <= 8; ++attempt) {
    llt.compute(k);
    if (llt.info() == Eigen::Success) return true;
    k.diagonal().array() += jitter * std::pow(10.0, attempt + 1);
  }
  return false;
}

struct Objective {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;  // with respect to (log lengthscales, log signal variance)
};

Objective evaluate_lml(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                       const Eigen::VectorXd& noise, const GpHyperparameters& h, double jitter) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Objective out;
  const Eigen::MatrixXd kf = signal_covariance(x, h);
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!robust_llt(kf, noise, jitter, llt)) return out;
  const Eigen::VectorXd alpha = llt.solve(z);
  const Eigen::MatrixXd l = llt.matrixL();
  out.value = -0.5 * z.dot(alpha) - l.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;

  const Eigen::MatrixXd w =
      alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd wk = w.cwiseProduct(kf);
  out.gradient.resize(d + 1);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double inv_l2 = 1.0 / (h.lengthscales[k] * h.lengthscales[k]);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        const double diff = x(i, k) - x(j, k);
        acc += wk(i, j) * diff * diff * inv_l2;
      }
    }
    out.gradient[k] = acc;  // symmetric off-diagonal pairs counted once, times 2 * 1/2
  }
  out.gradient[d] = 0.5 * wk.sum();
  return out;
}

GpHyperparameters from_log(const Eigen::VectorXd& phi) {
  const Eigen::Index d = phi.size() - 1;
  return {phi.head(d).array().exp().matrix(), std::exp(phi[d])};
}

// Log marginal likelihood plus the lengthscale log prior, in log parameters.
Objective evaluate_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                             const Eigen::VectorXd& noise, const Eigen::VectorXd& phi,
                             const GpOptions& options) {
  const GpHyperparameters h = from_log(phi);
  Objective out = evaluate_lml(x, z, noise, h, options.jitter);
  const double a = options.lengthscale_prior_shape, b = options.lengthscale_prior_rate;
  if (a <= 0.0 || !std::isfinite(out.value)) return out;
  for (Eigen::Index k = 0; k < h.lengthscales.size(); ++k) {
    const double l = h.lengthscales[k];
    out.value += (a - 1.0) * phi[k] - b * l;
    out.gradient[k] += (a - 1.0) - b * l;
  }
  return out;
}

}  // namespace

void GaussianProcess::factorize(const GpOptions& options) {
  const Eigen::MatrixXd kf = signal_covariance(x_, hyper_);
  if (!robust_llt(kf, noise_, options.jitter, llt_)) {
    throw NumericalError("GP covariance is not positive definite after jitter escalation");
  }
  alpha_ = llt_.solve(z_);
  const Eigen::MatrixXd l = llt_.matrixL();
  lml_ = -0.5 * z_.dot(alpha_) - l.diagonal().array().log().sum() -
         0.5 * static_cast<double>(z_.size()) * kLog2Pi;
}

GaussianProcess GaussianProcess::with_hyperparameters(const Eigen::MatrixXd& x,
                                                      const Eigen::VectorXd& y,
                                                      const Eigen::VectorXd& noise_var,
                                                      const GpHyperparameters& hyper,
                                                      const GpOptions& options) {
  if (x.rows() < 1 || x.rows() != y.size() || y.size() != noise_var.size()) {
    throw InvalidArgument("GP training data dimensions disagree");
  }
  if (hyper.lengthscales.size() != x.cols() || !(hyper.lengthscales.array() > 0.0).all() ||
      !(hyper.signal_variance > 0.0)) {
    throw InvalidArgument("GP hyperparameters must be positive and match the input dimension");
  }
  GaussianProcess gp;
  gp.x_ = x;
  gp.y_mean_ = y.mean();
  if (y.size() > 1) {
    const double var = (y.array() - gp.y_mean_).square().sum() / static_cast<double>(y.size() - 1);
    gp.y_scale_ = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  gp.z_ = (y.array() - gp.y_mean_) / gp.y_scale_;
  gp.noise_ = (noise_var.array() / (gp.y_scale_ * gp.y_scale_)).max(options.jitter);
  gp.hyper_ = hyper;
  gp.factorize(options);
  return gp;
}

GaussianProcess GaussianProcess::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& noise_var, RngStream& rng,
                                     const GpOptions& options) {
  const Eigen::Index d = x.cols();
  GpHyperparameters initial{Eigen::VectorXd::Constant(d, 0.3), 1.0};
  // Standardize once; hyperparameter search runs on the standardized data.
  GaussianProcess base = with_hyperparameters(x, y, noise_var, initial, options);

  Eigen::VectorXd lo(d + 1), hi(d + 1);
  lo.head(d).setConstant(std::log(options.lengthscale_min));
  hi.head(d).setConstant(std::log(options.lengthscale_max));
  lo[d] = std::log(options.signal_variance_min);
  hi[d] = std::log(options.signal_variance_max);

  Eigen::VectorXd best_phi;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int start = 0; start < std::max(1, options.restarts); ++start) {
    Eigen::VectorXd phi(d + 1);
    if (start == 0) {
      phi.head(d).setConstant(std::log(0.3));
      phi[d] = 0.0;
    } else {
      for (Eigen::Index k = 0; k <= d; ++k) phi[k] = rng.uniform(lo[k], hi[k]);
    }
    Objective cur = evaluate_posterior(base.x_, base.z_, base.noise_, phi, options);
    double step = 1.0;
    for (int it = 0; it < options.max_iterations && std::isfinite(cur.value); ++it) {
      bool moved = false;
      for (int backtrack = 0; backtrack < 30; ++backtrack) {
        const Eigen::VectorXd trial = (phi + step * cur.gradient).cwiseMax(lo).cwiseMin(hi);
        const Eigen::VectorXd delta = trial - phi;
        if (delta.cwiseAbs().maxCoeff() < 1e-9) break;
        Objective next = evaluate_posterior(base.x_, base.z_, base.noise_, trial, options);
        if (next.value >= cur.value + 1e-4 * cur.gradient.dot(delta)) {
          const double gain = next.value - cur.value;
          phi = trial;
          cur = std::move(next);
          step = std::min(step * 2.0, 1e3);
          moved = gain > 1e-8 * (1.0 + std::abs(cur.value));
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    if (cur.value > best_value) {
      best_value = cur.value;
      best_phi = phi;
    }
  }
  if (!std::isfinite(best_value)) {
    throw NumericalError("GP likelihood could not be evaluated at any start point");
  }
  return with_hyperparameters(x, y, noise_var, from_log(best_phi), options);
}

Prediction GaussianProcess::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != x_.cols()) throw InvalidArgument("prediction input has the wrong dimension");
  const Eigen::Index n = x_.rows();
  Eigen::VectorXd kstar(n);
  const Eigen::ArrayXd inv_ls = hyper_.lengthscales.array().inverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 = ((x_.row(i).transpose() - x).array() * inv_ls).square().sum();
    kstar[i] = hyper_.signal_variance * std::exp(-0.5 * r2);
  }
  const double mean = kstar.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(kstar);
  const double var = std::max(0.0, hyper_.signal_variance - v.squaredNorm());
  return {y_mean_ + y_scale_ * mean, y_scale_ * std::sqrt(var)};
}

double GaussianProcess::prior_stddev() const {
  return y_scale_ * std::sqrt(hyper_.signal_variance);
}

GPSurrogate fit(const std::vector<Observation>& observations, const ThetaBounds& bounds,
                RngStream& rng, const GpOptions& options) {
  bounds.validate();
  const auto n = static_cast<Eigen::Index>(observations.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(kThetaDim));
  Eigen::VectorXd y(n), noise(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& o = observations[static_cast<std::size_t>(i)];
    x.row(i) = bounds.normalize(o.theta).transpose();
    y[i] = o.mean();
    noise[i] = o.variance() / static_cast<double>(o.n());
  }
  bool distinct = false;
  for (Eigen::Index i = 1; i < n && !distinct; ++i) {
    for (Eigen::Index j = 0; j < i && !distinct; ++j) distinct = x.row(i) != x.row(j);
  }
  if (!distinct) throw InsufficientData("kriging fit needs at least two distinct theta");
  return GPSurrogate(GaussianProcess::fit(x, y, noise, rng, options), bounds);
}

double expected_improvement(double mean, double stddev, double best) {
  const double gap = mean - best;
  if (!(stddev > 0.0)) return std::max(gap, 0.0);
  const double z = gap / stddev;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(0.0, gap * cdf + stddev * pdf);
}

double expected_improvement(const GPSurrogate& model, const ThetaVector& theta, double best) {
  const Prediction p = model.predict(theta);
  return expected_improvement(p.mean, p.stddev, best);
}

Eigen::MatrixXd halton_pool(Eigen::Index dim, std::size_t count, RngStream& rng) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (dim < 1 || dim > static_cast<Eigen::Index>(std::size(kPrimes))) {
    throw InvalidArgument("halton_pool supports 1..12 dimensions");
  }
  Eigen::MatrixXd pool(static_cast<Eigen::Index>(count), dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double shift = rng.uniform();
    const int base = kPrimes[k];
    for (std::size_t i = 0; i < count; ++i) {
      double f = 1.0, r = 0.0;
      for (std::size_t idx = i + 1; idx > 0; idx /= static_cast<std::size_t>(base)) {
        f /= base;
        r += f * static_cast<double>(idx % static_cast<std::size_t>(base));
      }
      r += shift;
      pool(static_cast<Eigen::Index>(i), k) = r - std::floor(r);
    }
  }
  return pool;
}

namespace {

bool is_excluded(const Eigen::VectorXd& u, const Eigen::MatrixXd& excluded, double radius) {
  for (Eigen::Index i = 0; i < excluded.rows(); ++i) {
    if ((excluded.row(i).transpose() - u).norm() < radius) return true;
  }
  return false;
}

}  // namespace

Eigen::VectorXd suggest_unit(const GaussianProcess& gp, double best,
                             const Eigen::MatrixXd& excluded, RngStream& rng,
                             const SuggestOptions& options) {
  const Eigen::Index d = gp.dim();
  const Eigen::MatrixXd pool = halton_pool(d, options.pool_size, rng);

  Eigen::VectorXd incumbent;
  double best_ei = -1.0, best_sd = -1.0;
  for (Eigen::Index i = 0; i < pool.rows(); ++i) {
    const Eigen::VectorXd u = pool.row(i).transpose();
    if (is_excluded(u, excluded, options.exclusion_radius)) continue;
    const Prediction p = gp.predict(u);
    const double ei = expected_improvement(p.mean, p.stddev, best);
    if (ei > best_ei || (ei == best_ei && p.stddev > best_sd)) {
      best_ei = ei;
      best_sd = p.stddev;
      incumbent = u;
    }
  }
  if (incumbent.size() == 0) {
    Eigen::VectorXd u(d);
    for (Eigen::Index k = 0; k < d; ++k) u[k] = rng.uniform();
    return u;
  }

  double step = options.initial_step;
  for (int sweep = 0; sweep < options.max_sweeps && step >= options.min_step; ++sweep) {
    bool improved = false;
    for (Eigen::Index k = 0; k < d; ++k) {
      for (double sign : {1.0, -1.0}) {
        Eigen::VectorXd trial = incumbent;
        trial[k] = std::clamp(trial[k] + sign * step, 0.0, 1.0);
        if (trial[k] == incumbent[k] || is_excluded(trial, excluded, options.exclusion_radius)) {
          continue;
        }
        const Prediction p = gp.predict(trial);
        const double ei = expected_improvement(p.mean, p.stddev, best);
        if (ei > best_ei) {
          best_ei = ei;
          incumbent = std::move(trial);
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return incumbent;
}

ThetaVector suggest(const GPSurrogate& model, double best, const std::vector<ThetaVector>& failed,
                    RngStream& rng, const SuggestOptions& options) {
  Eigen::MatrixXd excluded(static_cast<Eigen::Index>(failed.size()),
                           static_cast<Eigen::Index>(kThetaDim));
  for (std::size_t i = 0; i < failed.size(); ++i) {
    excluded.row(static_cast<Eigen::Index>(i)) = model.bounds().normalize(failed[i]).transpose();
  }
  const Eigen::VectorXd u = suggest_unit(model.gp(), best, excluded, rng, options);
  return model.bounds().denormalize(u);
}

}  // namespace mfstune
