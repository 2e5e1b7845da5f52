#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "gpvae/error.hpp"
#include "gpvae/structured_gaussian.hpp"

using namespace gpvae;

namespace {

struct Band {
  std::vector<double> diag, off, mean;
};

Band random_band(std::size_t T, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.5, 2.0), o(-1.0, 1.0);
  Band b;
  for (std::size_t t = 0; t < T; ++t) b.diag.push_back(d(rng));
  for (std::size_t t = 0; t + 1 < T; ++t) b.off.push_back(o(rng));
  for (std::size_t t = 0; t < T; ++t) b.mean.push_back(o(rng));
  return b;
}

// Dense upper-bidiagonal matrix written out element by element.
Matrix dense_b(const Band& b) {
  const auto T = static_cast<Eigen::Index>(b.diag.size());
  Matrix B = Matrix::Zero(T, T);
  for (Eigen::Index t = 0; t < T; ++t) B(t, t) = b.diag[static_cast<std::size_t>(t)];
  for (Eigen::Index t = 0; t + 1 < T; ++t) B(t, t + 1) = b.off[static_cast<std::size_t>(t)];
  return B;
}

// KL(N(m, S) || N(0, K)) by the dense two-Gaussian formula.
double dense_kl(const Vector& m, const Matrix& S, const Matrix& K) {
  const Eigen::LLT<Matrix> lk(K);
  const double tr = lk.solve(S).trace();
  const double quad = m.dot(lk.solve(m));
  return 0.5 * (tr + quad - static_cast<double>(m.size()) + std::log(K.determinant()) - std::log(S.determinant()));
}

Vector as_vec(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

TEST_CASE("precision assembly, solves and log-determinant match dense algebra") {
  std::mt19937_64 rng(1);
  for (std::size_t T : {1, 2, 5, 17}) {
    const Band b = random_band(T, rng);
    const Matrix B = dense_b(b);
    CHECK((assemble_precision(b.diag, b.off) - B.transpose() * B).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((band_matrix(b.diag, b.off) - B).cwiseAbs().maxCoeff() == 0.0);

    std::vector<double> x(T), u(T);
    bidiag_solve(b.diag, b.off, b.mean, x);
    bidiag_solve_transpose(b.diag, b.off, b.mean, u);
    CHECK((B * as_vec(x) - as_vec(b.mean)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((B.transpose() * as_vec(u) - as_vec(b.mean)).cwiseAbs().maxCoeff() < 1e-12);

    StructuredPosterior post;
    post.means = RowMatrix::Map(b.mean.data(), 1, static_cast<Eigen::Index>(T));
    post.band_diag = RowMatrix::Map(b.diag.data(), 1, static_cast<Eigen::Index>(T));
    post.band_off = RowMatrix::Map(b.off.data(), 1, static_cast<Eigen::Index>(T - 1));
    const double dense = std::log((B.transpose() * B).determinant());
    CHECK(std::abs(log_det_precision(post, 0) - dense) < 1e-10);
  }
}

TEST_CASE("KL matches the dense formula and its gradient matches finite differences") {
  std::mt19937_64 rng(2);
  for (std::size_t T : {1, 3, 8}) {
    const Band b = random_band(T, rng);
    const GramFactor prior = gram(KernelSpec::cauchy(1.0, 2.0), regular_timestamps(T));
    const Matrix B = dense_b(b);
    const Matrix S = (B.transpose() * B).inverse();
    const Matrix Kj = prior.K + prior.jitter * Matrix::Identity(prior.K.rows(), prior.K.cols());
    const double kl = kl_to_prior(b.mean, b.diag, b.off, prior);
    CHECK(std::abs(kl - dense_kl(as_vec(b.mean), S, Kj)) < 1e-8);

    const KlGradient g = kl_to_prior_with_grad(b.mean, b.diag, b.off, prior);
    CHECK(g.value == doctest::Approx(kl).epsilon(1e-12));
    const double h = 1e-6;
    Band w = b;
    for (std::size_t i = 0; i < T; ++i) {
      w.mean[i] += h;
      const double up = kl_to_prior(w.mean, w.diag, w.off, prior);
      w.mean[i] -= 2 * h;
      const double dn = kl_to_prior(w.mean, w.diag, w.off, prior);
      w.mean[i] += h;
      CHECK(g.d_mean[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
      w.diag[i] += h;
      const double up2 = kl_to_prior(w.mean, w.diag, w.off, prior);
      w.diag[i] -= 2 * h;
      const double dn2 = kl_to_prior(w.mean, w.diag, w.off, prior);
      w.diag[i] += h;
      CHECK(g.d_diag[i] == doctest::Approx((up2 - dn2) / (2 * h)).epsilon(1e-6));
    }
    for (std::size_t i = 0; i + 1 < T; ++i) {
      w.off[i] += h;
      const double up = kl_to_prior(w.mean, w.diag, w.off, prior);
      w.off[i] -= 2 * h;
      const double dn = kl_to_prior(w.mean, w.diag, w.off, prior);
      w.off[i] += h;
      CHECK(g.d_off[i] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("KL vanishes when the posterior equals the prior") {
  std::mt19937_64 rng(3);
  const Band b = random_band(6, rng);
  const Matrix B = dense_b(b);
  const GramFactor prior = gram_from_covariance((B.transpose() * B).inverse(), regular_timestamps(6));
  const std::vector<double> zero(6, 0.0);
  CHECK(std::abs(kl_to_prior(zero, b.diag, b.off, prior)) < 1e-8);
}

TEST_CASE("samples have covariance inverse to the precision") {
  std::mt19937_64 rng(4);
  const std::size_t T = 4;
  const Band b = random_band(T, rng);
  StructuredPosterior post;
  post.means = RowMatrix::Map(b.mean.data(), 1, T);
  post.band_diag = RowMatrix::Map(b.diag.data(), 1, T);
  post.band_off = RowMatrix::Map(b.off.data(), 1, T - 1);
  const Matrix B = dense_b(b);
  const Matrix S = (B.transpose() * B).inverse();

  const int draws = 40000;
  std::normal_distribution<double> nd;
  Matrix acc = Matrix::Zero(T, T);
  Vector mean_acc = Vector::Zero(T);
  std::vector<double> eps(T);
  for (int s = 0; s < draws; ++s) {
    for (auto& e : eps) e = nd(rng);
    const Vector z = as_vec(sample(post, 0, eps)) - as_vec(b.mean);
    acc += z * z.transpose();
    mean_acc += z;
  }
  acc /= draws;
  mean_acc /= draws;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(T); ++i) {
    CHECK(std::abs(mean_acc[i]) < 4.0 * std::sqrt(S(i, i) / draws));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(T); ++j) {
      const double se = std::sqrt((S(i, i) * S(j, j) + S(i, j) * S(i, j)) / draws);
      CHECK(std::abs(acc(i, j) - S(i, j)) < 4.0 * se);
    }
  }
}

TEST_CASE("differentiable band ops pass finite-difference checks") {
  std::mt19937_64 rng(5);
  const std::size_t R = 3, T = 5;
  std::uniform_real_distribution<double> d(0.6, 1.8), o(-0.8, 0.8);
  ad::Tensor mean({R, T}), diag({R, T}), off({R, T - 1}), eps({R, T});
  for (auto& v : mean.data()) v = o(rng);
  for (auto& v : diag.data()) v = d(rng);
  for (auto& v : off.data()) v = o(rng);
  for (auto& v : eps.data()) v = o(rng);
  const auto prior = std::make_shared<const GramFactor>(gram(KernelSpec::cauchy(1.0, 2.0), regular_timestamps(T)));

  std::vector<ad::Tensor> pts = {mean, diag, off};
  CHECK(ad::gradient_check(
            [&](ad::Tape& t, std::span<const ad::Var> v) {
              ad::Tensor w({R, T});
              for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.2 + 0.1 * static_cast<double>(i);
              return ad::sum(ad::mul(band_sample(v[0], v[1], v[2], t.constant(eps)), t.constant(w)));
            },
            pts) < 1e-6);
  CHECK(ad::gradient_check(
            [&](ad::Tape&, std::span<const ad::Var> v) { return band_kl(v[0], v[1], v[2], prior); }, pts) < 1e-6);

  // The AD KL equals the sum of per-row KLs.
  ad::Tape tape;
  const double total = band_kl(tape.constant(mean), tape.constant(diag), tape.constant(off), prior).value().item();
  double expect = 0.0;
  for (std::size_t r = 0; r < R; ++r)
    expect += kl_to_prior(std::span<const double>(mean.data().data() + r * T, T),
                          std::span<const double>(diag.data().data() + r * T, T),
                          std::span<const double>(off.data().data() + r * (T - 1), T - 1), *prior);
  CHECK(total == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("posterior validation") {
  StructuredPosterior post;
  post.means = RowMatrix::Zero(2, 3);
  post.band_diag = RowMatrix::Ones(2, 3);
  post.band_off = RowMatrix::Zero(2, 2);
  CHECK_NOTHROW(post.validate());
  post.band_diag(1, 2) = 0.0;
  CHECK_THROWS_AS(post.validate(), DomainError);
  post.band_diag(1, 2) = 1.0;
  post.band_off = RowMatrix::Zero(2, 3);
  CHECK_THROWS_AS(post.validate(), ShapeError);
}
