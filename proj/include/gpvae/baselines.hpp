#pragma once
// Classical imputers: per-channel mean, last observation carried forward,
// and independent per-channel GP regression over time.
//
// All imputers take the observed batch and return dense n*T*d values in the
// batch layout; observed entries are copied through unchanged.

#include <span>
#include <vector>

#include "gpvae/data.hpp"
#include "gpvae/kernels.hpp"

namespace gpvae {

/// Missing entries take the mean of the observed entries of the same series
/// and channel; all-missing channels get 0.
std::vector<double> mean_impute(const TimeSeriesBatch& batch);

/// Missing entries take the latest earlier observation of the channel;
/// leading gaps take the first observation; all-missing channels get 0.
std::vector<double> forward_impute(const TimeSeriesBatch& batch);

struct GPRegressionSpec {
  KernelSpec kernel = KernelSpec::rbf(1.0, 2.0);
  double noise_variance = 1e-2;
  /// Subtract the observed channel mean before conditioning (prior mean =
  /// that mean). false: zero prior mean.
  bool center = true;
  /// Nonempty: per channel, the lengthscale in this list with the highest
  /// marginal likelihood replaces kernel.lengthscale.
  std::vector<double> lengthscale_grid = {0.5, 1.0, 2.0, 4.0, 8.0};

  void validate() const;
};

struct GPPosterior {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Posterior of f at `query` given y observed at `times` with i.i.d. noise.
/// No observations: the prior.
GPPosterior gp_posterior(const KernelSpec& kernel, double noise_variance, std::span<const double> times,
                         std::span<const double> y, std::span<const double> query);

/// log p(y | times) under a zero-mean GP with the given kernel and noise.
double gp_log_marginal(const KernelSpec& kernel, double noise_variance, std::span<const double> times,
                       std::span<const double> y);

/// Copy of `kernel` with a new lengthscale (RBF precision updated to match).
KernelSpec with_lengthscale(KernelSpec kernel, double lengthscale);

struct GPImputation {
  std::vector<double> values;
  /// Posterior variance at missing entries, 0 at observed ones.
  std::vector<double> variance;
};

GPImputation gp_channel_impute(const TimeSeriesBatch& batch, const GPRegressionSpec& spec = {});

}  // namespace gpvae
