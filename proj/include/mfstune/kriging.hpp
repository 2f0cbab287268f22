#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mfstune/geometry.hpp"
#include "mfstune/sampling.hpp"

namespace mfstune {

/// Replicated evaluations of one theta, summarized by sample mean and
/// unbiased sample variance (zero for a single value).
struct Observation {
  ThetaVector theta;
  std::vector<double> q_values;

  explicit Observation(ThetaVector t, std::vector<double> q);

  std::size_t n() const { return q_values.size(); }
  double mean() const { return mean_; }
  double variance() const { return variance_; }

 private:
  double mean_ = 0.0;
  double variance_ = 0.0;
};

struct GpHyperparameters {
  Eigen::VectorXd lengthscales;  // per input dimension, unit-cube coordinates
  double signal_variance = 1.0;  // in standardized target units
};

struct GpOptions {
  int restarts = 8;
  double lengthscale_min = 1e-2;
  double lengthscale_max = 1e1;
  double signal_variance_min = 1e-2;
  double signal_variance_max = 1e2;
  double jitter = 1e-8;
  int max_iterations = 200;
  // Gamma(shape, rate) prior on each unit-cube lengthscale; the fit maximizes
  // the posterior. shape <= 0 gives plain maximum likelihood.
  double lengthscale_prior_shape = 3.0;
  double lengthscale_prior_rate = 6.0;
};

struct Prediction {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Zero-mean GP with an anisotropic squared-exponential kernel on
/// standardized targets and a per-point noise variance.
class GaussianProcess {
 public:
  /// Fits hyperparameters by multi-start maximization of the log marginal
  /// likelihood. `noise_var` is in target units and is floored at the jitter
  /// after standardization.
  static GaussianProcess fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& noise_var, RngStream& rng,
                             const GpOptions& options = {});

  static GaussianProcess with_hyperparameters(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& noise_var,
                                              const GpHyperparameters& hyper,
                                              const GpOptions& options = {});

  /// Posterior mean and standard deviation in original target units.
  Prediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const GpHyperparameters& hyperparameters() const { return hyper_; }
  double log_marginal_likelihood() const { return lml_; }
  double prior_stddev() const;
  Eigen::Index dim() const { return x_.cols(); }
  Eigen::Index size() const { return x_.rows(); }

 private:
  GaussianProcess() = default;
  void factorize(const GpOptions& options);

  Eigen::MatrixXd x_;
  Eigen::VectorXd z_;      // standardized targets
  Eigen::VectorXd noise_;  // standardized noise variances
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  GpHyperparameters hyper_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

/// Kriging surrogate over theta: a GaussianProcess on bounds-normalized
/// coordinates.
class GPSurrogate {
 public:
  GPSurrogate(GaussianProcess gp, ThetaBounds bounds) : gp_(std::move(gp)), bounds_(bounds) {}

  Prediction predict(const ThetaVector& theta) const { return gp_.predict(bounds_.normalize(theta)); }
  const GaussianProcess& gp() const { return gp_; }
  const ThetaBounds& bounds() const { return bounds_; }

 private:
  GaussianProcess gp_;
  ThetaBounds bounds_;
};

/// Observation noise is the squared standard error of each mean. Throws
/// InsufficientData with fewer than two distinct theta.
GPSurrogate fit(const std::vector<Observation>& observations, const ThetaBounds& bounds,
                RngStream& rng, const GpOptions& options = {});

/// Expected improvement over `best` for maximization.
double expected_improvement(double mean, double stddev, double best);
double expected_improvement(const GPSurrogate& model, const ThetaVector& theta, double best);

struct SuggestOptions {
  std::size_t pool_size = 2048;
  double exclusion_radius = 1e-6;  // unit-cube distance to a failed theta
  double initial_step = 0.05;
  double min_step = 1e-4;
  int max_sweeps = 200;
};

/// Shifted Halton points in the unit cube.
Eigen::MatrixXd halton_pool(Eigen::Index dim, std::size_t count, RngStream& rng);

/// EI maximizer in unit-cube coordinates: best of a low-discrepancy pool
/// (ties to larger stddev), then coordinate-wise refinement. Points within the
/// exclusion radius of a row of `excluded` are never returned; if the whole
/// pool is excluded a uniform random point is returned.
Eigen::VectorXd suggest_unit(const GaussianProcess& gp, double best,
                             const Eigen::MatrixXd& excluded, RngStream& rng,
                             const SuggestOptions& options = {});

ThetaVector suggest(const GPSurrogate& model, double best, const std::vector<ThetaVector>& failed,
                    RngStream& rng, const SuggestOptions& options = {});

}  // namespace mfstune
