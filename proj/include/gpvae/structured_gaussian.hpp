#pragma once
// Gaussian posterior over a latent trajectory with tridiagonal precision
// Lambda = B^T B, where B is upper bidiagonal with diagonal b_{t,t} > 0 and
// superdiagonal b_{t,t+1}. One such Gaussian per latent dimension; latent
// dimensions are independent.

#include <memory>
#include <span>
#include <vector>

#include "gpvae/autodiff.hpp"
#include "gpvae/kernels.hpp"

namespace gpvae {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct StructuredPosterior {
  RowMatrix means;      // k x T
  RowMatrix band_diag;  // k x T, strictly positive
  RowMatrix band_off;   // k x (T-1)

  std::size_t latent_dim() const { return static_cast<std::size_t>(means.rows()); }
  std::size_t steps() const { return static_cast<std::size_t>(means.cols()); }

  std::span<const double> mean(std::size_t j) const;
  std::span<const double> diag(std::size_t j) const;
  std::span<const double> off(std::size_t j) const;

  /// Shapes agree and every diagonal entry is positive; throws otherwise.
  void validate() const;
};

/// Dense upper-bidiagonal B.
Matrix band_matrix(std::span<const double> diag, std::span<const double> off);
/// Dense Lambda = B^T B (tridiagonal).
Matrix assemble_precision(std::span<const double> diag, std::span<const double> off);

/// Solves B x = rhs by back-substitution.
void bidiag_solve(std::span<const double> diag, std::span<const double> off, std::span<const double> rhs,
                  std::span<double> x);
/// Solves B^T u = rhs by forward substitution.
void bidiag_solve_transpose(std::span<const double> diag, std::span<const double> off,
                            std::span<const double> rhs, std::span<double> u);

/// z = m_j + B_j^{-1} eps; distributed N(m_j, Lambda_j^{-1}) for eps ~ N(0, I).
/// Linear in T.
std::vector<double> sample(const StructuredPosterior& post, std::size_t j, std::span<const double> eps);

/// log det Lambda_j = 2 sum_t log b_{t,t}.
double log_det_precision(const StructuredPosterior& post, std::size_t j);

/// KL(N(m, Lambda^{-1}) || N(0, K)) for one latent dimension, together with
/// its gradient with respect to the mean and both bands.
struct KlGradient {
  double value = 0.0;
  std::vector<double> d_mean;
  std::vector<double> d_diag;
  std::vector<double> d_off;
};

double kl_to_prior(std::span<const double> mean, std::span<const double> diag, std::span<const double> off,
                   const GramFactor& prior);
KlGradient kl_to_prior_with_grad(std::span<const double> mean, std::span<const double> diag,
                                 std::span<const double> off, const GramFactor& prior);
double kl_to_prior(const StructuredPosterior& post, std::size_t j, const GramFactor& prior);
/// Sum over latent dimensions.
double total_kl(const StructuredPosterior& post, const GramFactor& prior);

/// Factor an explicit covariance as a prior (no jitter).
GramFactor gram_from_covariance(const Matrix& K, std::vector<double> timestamps);

// Differentiable versions over R independent rows (R = series x latent dims):
//   mean, diag, eps: [R, T]; off: [R, T-1].

/// z = mean + B^{-1} eps, row by row.
ad::Var band_sample(ad::Var mean, ad::Var diag, ad::Var off, ad::Var eps);
/// Sum of the per-row KL divergences to a shared prior.
ad::Var band_kl(ad::Var mean, ad::Var diag, ad::Var off, std::shared_ptr<const GramFactor> prior);

}  // namespace gpvae
