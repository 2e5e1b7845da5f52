#include "gpvae/baselines.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gpvae/error.hpp"

namespace gpvae {

namespace {

using Index = Eigen::Index;

Matrix noisy_gram(const KernelSpec& kernel, double noise_variance, std::span<const double> times) {
  Matrix K = cross_gram(kernel, times, times);
  K.diagonal().array() += noise_variance + kernel.effective_jitter();
  return K;
}

Eigen::LLT<Matrix> factor(const Matrix& K) {
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) throw NumericError("GP regression: Cholesky failed");
  return llt;
}

Vector as_vector(std::span<const double> y) {
  return Eigen::Map<const Vector>(y.data(), static_cast<Index>(y.size()));
}

}  // namespace

std::vector<double> mean_impute(const TimeSeriesBatch& batch) {
  batch.validate();
  std::vector<double> out = batch.values;
  for (std::size_t i = 0; i < batch.n; ++i)
    for (std::size_t j = 0; j < batch.dim; ++j) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t t = 0; t < batch.steps; ++t) {
        const std::size_t k = batch.index(i, t, j);
        if (!batch.mask[k]) {
          sum += batch.values[k];
          ++count;
        }
      }
      const double fill = count ? sum / static_cast<double>(count) : 0.0;
      for (std::size_t t = 0; t < batch.steps; ++t) {
        const std::size_t k = batch.index(i, t, j);
        if (batch.mask[k]) out[k] = fill;
      }
    }
  return out;
}

std::vector<double> forward_impute(const TimeSeriesBatch& batch) {
  batch.validate();
  std::vector<double> out = batch.values;
  for (std::size_t i = 0; i < batch.n; ++i)
    for (std::size_t j = 0; j < batch.dim; ++j) {
      bool seen = false;
      double last = 0.0;
      for (std::size_t t = 0; t < batch.steps; ++t) {
        const std::size_t k = batch.index(i, t, j);
        if (!batch.mask[k] && !seen) {
          seen = true;
          last = batch.values[k];
        }
      }
      for (std::size_t t = 0; t < batch.steps; ++t) {
        const std::size_t k = batch.index(i, t, j);
        if (batch.mask[k])
          out[k] = last;
        else
          last = batch.values[k];
      }
    }
  return out;
}

void GPRegressionSpec::validate() const {
  kernel.validate();
  if (!(noise_variance >= 0.0)) throw DomainError("GP regression: noise_variance must be >= 0");
  for (double l : lengthscale_grid)
    if (!(l > 0.0)) throw DomainError("GP regression: grid lengthscales must be positive");
}

KernelSpec with_lengthscale(KernelSpec kernel, double lengthscale) {
  kernel.lengthscale = lengthscale;
  if (kernel.family == KernelFamily::RBF) kernel.precision_lambda = 1.0 / (lengthscale * lengthscale);
  return kernel;
}

GPPosterior gp_posterior(const KernelSpec& kernel, double noise_variance, std::span<const double> times,
                         std::span<const double> y, std::span<const double> query) {
  if (times.size() != y.size()) throw ShapeError("gp_posterior: times and y differ in length");
  GPPosterior post;
  post.mean.assign(query.size(), 0.0);
  post.variance.resize(query.size());
  for (std::size_t q = 0; q < query.size(); ++q) post.variance[q] = kernel(query[q], query[q]);
  if (times.empty()) return post;

  const auto llt = factor(noisy_gram(kernel, noise_variance, times));
  const Matrix Ks = cross_gram(kernel, times, query);  // m x q
  const Vector alpha = llt.solve(as_vector(y));
  const Matrix V = llt.matrixL().solve(Ks);
  for (std::size_t q = 0; q < query.size(); ++q) {
    const auto c = static_cast<Index>(q);
    post.mean[q] = Ks.col(c).dot(alpha);
    post.variance[q] = std::max(0.0, post.variance[q] - V.col(c).squaredNorm());
  }
  return post;
}

double gp_log_marginal(const KernelSpec& kernel, double noise_variance, std::span<const double> times,
                       std::span<const double> y) {
  if (times.size() != y.size()) throw ShapeError("gp_log_marginal: times and y differ in length");
  if (times.empty()) return 0.0;
  const auto llt = factor(noisy_gram(kernel, noise_variance, times));
  const Vector a = llt.matrixL().solve(as_vector(y));
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * a.squaredNorm() - 0.5 * logdet -
         0.5 * static_cast<double>(times.size()) * std::log(2.0 * std::numbers::pi);
}

GPImputation gp_channel_impute(const TimeSeriesBatch& batch, const GPRegressionSpec& spec) {
  batch.validate();
  spec.validate();
  GPImputation out;
  out.values = batch.values;
  out.variance.assign(batch.values.size(), 0.0);

  std::vector<double> times, y, query;
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < batch.n; ++i)
    for (std::size_t j = 0; j < batch.dim; ++j) {
      times.clear();
      y.clear();
      query.clear();
      targets.clear();
      for (std::size_t t = 0; t < batch.steps; ++t) {
        const std::size_t k = batch.index(i, t, j);
        if (batch.mask[k]) {
          query.push_back(batch.timestamps[t]);
          targets.push_back(k);
        } else {
          times.push_back(batch.timestamps[t]);
          y.push_back(batch.values[k]);
        }
      }
      if (query.empty()) continue;

      double offset = 0.0;
      if (spec.center && !y.empty()) {
        for (double v : y) offset += v;
        offset /= static_cast<double>(y.size());
        for (double& v : y) v -= offset;
      }
      KernelSpec kernel = spec.kernel;
      if (!spec.lengthscale_grid.empty() && times.size() > 1) {
        double best = -std::numeric_limits<double>::infinity();
        for (double l : spec.lengthscale_grid) {
          const KernelSpec candidate = with_lengthscale(spec.kernel, l);
          const double lml = gp_log_marginal(candidate, spec.noise_variance, times, y);
          if (lml > best) {
            best = lml;
            kernel = candidate;
          }
        }
      }
      const GPPosterior post = gp_posterior(kernel, spec.noise_variance, times, y, query);
      for (std::size_t q = 0; q < targets.size(); ++q) {
        out.values[targets[q]] = post.mean[q] + offset;
        out.variance[targets[q]] = post.variance[q];
      }
    }
  return out;
}

}  // namespace gpvae
