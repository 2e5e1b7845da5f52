#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "gpvae/baselines.hpp"
#include "gpvae/error.hpp"

using namespace gpvae;

namespace {

// One series, T steps, d channels; NaN marks a missing entry.
TimeSeriesBatch batch_of(std::size_t T, std::size_t d, const std::vector<double>& v) {
  TimeSeriesBatch b;
  b.n = 1;
  b.steps = T;
  b.dim = d;
  b.timestamps = regular_timestamps(T);
  for (double x : v) {
    b.mask.push_back(std::isnan(x) ? 1 : 0);
    b.values.push_back(std::isnan(x) ? 0.0 : x);
  }
  return b;
}

constexpr double M = NAN;

}  // namespace

TEST_CASE("mean imputation fixtures") {
  CHECK(mean_impute(batch_of(3, 1, {1, M, 3})) == std::vector<double>{1, 2, 3});
  CHECK(mean_impute(batch_of(3, 1, {1, 4, 3})) == std::vector<double>{1, 4, 3});
  CHECK(mean_impute(batch_of(3, 1, {M, M, M})) == std::vector<double>{0, 0, 0});
  // Two channels interleaved: [1, M, 5] and [M, 2, 4].
  CHECK(mean_impute(batch_of(3, 2, {1, M, M, 2, 5, 4})) == std::vector<double>{1, 3, 3, 2, 5, 4});
}

TEST_CASE("forward imputation fixtures") {
  CHECK(forward_impute(batch_of(3, 1, {1, M, 3})) == std::vector<double>{1, 1, 3});
  CHECK(forward_impute(batch_of(3, 1, {M, 2, M})) == std::vector<double>{2, 2, 2});
  CHECK(forward_impute(batch_of(4, 1, {M, M, 7, M})) == std::vector<double>{7, 7, 7, 7});
  CHECK(forward_impute(batch_of(2, 1, {M, M})) == std::vector<double>{0, 0});
  CHECK(forward_impute(batch_of(3, 1, {4, 5, 6})) == std::vector<double>{4, 5, 6});
}

TEST_CASE("mean and forward imputation commute with channel permutation") {
  const auto a = batch_of(4, 2, {1, M, M, 2, 3, M, M, 8});
  const auto swapped = batch_of(4, 2, {M, 1, 2, M, M, 3, 8, M});
  const auto ma = mean_impute(a), ms = mean_impute(swapped);
  const auto fa = forward_impute(a), fs = forward_impute(swapped);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(ma[2 * t] == ms[2 * t + 1]);
    CHECK(fa[2 * t + 1] == fs[2 * t]);
  }
}

TEST_CASE("GP posterior, scalar formulas") {
  const KernelSpec k = KernelSpec::rbf(2.0, 1.0);
  const std::vector<double> t0 = {0.0}, y = {3.0}, q = {0.0};
  const GPPosterior p = gp_posterior(k, 0.5, t0, y, q);
  const double jitter = k.effective_jitter();
  CHECK(p.mean[0] == doctest::Approx(3.0 * 2.0 / (2.0 + 0.5 + jitter)).epsilon(1e-12));
  CHECK(p.variance[0] == doctest::Approx(2.0 - 4.0 / (2.5 + jitter)).epsilon(1e-12));

  const GPPosterior prior = gp_posterior(k, 0.5, {}, {}, q);
  CHECK(prior.mean[0] == 0.0);
  CHECK(prior.variance[0] == 2.0);
}

TEST_CASE("noise-free GP regression interpolates") {
  KernelSpec k = KernelSpec::rbf(1.0, 1.0);
  k.jitter = 1e-13;
  const std::vector<double> t = {0.0, 1.0, 2.5, 4.0}, y = {0.3, -1.2, 0.8, 2.0};
  const GPPosterior p = gp_posterior(k, 0.0, t, y, t);
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(std::abs(p.mean[i] - y[i]) < 1e-8);
    CHECK(p.variance[i] < 1e-8);
    CHECK(p.variance[i] >= 0.0);
  }
}

TEST_CASE("log marginal likelihood matches the dense formula") {
  const KernelSpec k = KernelSpec::rbf(1.3, 2.0);
  const std::vector<double> t = {0.0, 1.0, 3.0}, y = {0.5, -0.1, 1.0};
  Matrix K = cross_gram(k, t, t);
  K.diagonal().array() += 0.1 + k.effective_jitter();
  const Vector yv = Eigen::Map<const Vector>(y.data(), 3);
  const double expect = -0.5 * yv.dot(K.inverse() * yv) - 0.5 * std::log(K.determinant()) - 1.5 * std::log(2 * M_PI);
  CHECK(gp_log_marginal(k, 0.1, t, y) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("GP imputation leaves observed entries and full series alone") {
  const auto full = batch_of(3, 2, {1, 2, 3, 4, 5, 6});
  const GPImputation g = gp_channel_impute(full);
  CHECK(g.values == full.values);
  for (double v : g.variance) CHECK(v == 0.0);

  const auto part = batch_of(4, 1, {1, M, 3, M});
  const GPImputation h = gp_channel_impute(part);
  CHECK(h.values[0] == 1.0);
  CHECK(h.values[2] == 3.0);
  CHECK(h.variance[1] > 0.0);
  CHECK(h.variance[0] == 0.0);

  GPRegressionSpec bad;
  bad.noise_variance = -1.0;
  CHECK_THROWS_AS(gp_channel_impute(part, bad), DomainError);
}

TEST_CASE("lengthscale selection prefers the generating scale") {
  std::mt19937_64 rng(5);
  const auto t = regular_timestamps(40);
  const KernelSpec truth = KernelSpec::rbf(1.0, 4.0);
  Matrix K = cross_gram(truth, t, t) + 1e-8 * Matrix::Identity(40, 40);
  const Matrix L = K.llt().matrixL();
  std::normal_distribution<double> nd;
  double best_true = 0, best_short = 0;
  for (int rep = 0; rep < 5; ++rep) {
    Vector e(40);
    for (auto& v : e) v = nd(rng);
    const Vector f = L * e;
    const std::vector<double> y(f.data(), f.data() + 40);
    best_true += gp_log_marginal(truth, 1e-4, t, y);
    best_short += gp_log_marginal(with_lengthscale(truth, 0.5), 1e-4, t, y);
  }
  CHECK(best_true > best_short);
}
