#pragma once
// Stationary GP kernels over time and the jittered Gram factorization used by
// the latent prior and the data-space GP baseline.

#include <Eigen/Core>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gpvae {

enum class KernelFamily { RBF, RationalQuadratic, Cauchy };

std::string_view kernel_family_name(KernelFamily f);
KernelFamily parse_kernel_family(std::string_view name);

struct KernelSpec {
  KernelFamily family = KernelFamily::Cauchy;
  double sigma2 = 1.0;
  /// Time units. Used by RationalQuadratic and Cauchy.
  double lengthscale = 2.0;
  /// 1/time^2. Used by RBF only.
  double precision_lambda = 1.0;
  double alpha = 1.0;
  /// Diagonal boost added before factorization. Negative selects the
  /// default of 1e-6 * sigma2.
  double jitter = -1.0;

  static KernelSpec cauchy(double sigma2, double lengthscale);
  static KernelSpec rbf(double sigma2, double lengthscale);
  static KernelSpec rational_quadratic(double sigma2, double lengthscale, double alpha);

  double effective_jitter() const { return jitter < 0.0 ? 1e-6 * sigma2 : jitter; }
  /// Throws DomainError on nonpositive sigma2 / lengthscale / alpha / lambda.
  void validate() const;
  /// k(tau, tau').
  double operator()(double tau, double tau_prime) const;
};

// Unit-variance kernel profiles in terms of the lag r = tau - tau'.
double rbf(double r, double lambda);
double rational_quadratic(double r, double alpha, double lengthscale);
double cauchy(double tau, double tau_prime, double sigma2, double lengthscale);

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct GramFactor {
  Matrix K;
  /// Lower Cholesky factor of K + jitter * I.
  Matrix L;
  std::vector<double> timestamps;
  double jitter = 0.0;

  std::size_t size() const { return timestamps.size(); }
  /// 2 * sum(log diag L).
  double log_det() const;
  /// (K + jitter I)^{-1} b.
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  /// L^{-1} b.
  Matrix solve_lower(const Matrix& b) const;
};

/// Timestamps must be strictly increasing. The jitter is multiplied by 10 up
/// to three times if the factorization fails; NumericError after that.
GramFactor gram(const KernelSpec& spec, std::span<const double> timestamps);

/// Standard-normal prior over T steps (K = I); used by the no-GP ablations.
GramFactor identity_gram(std::span<const double> timestamps);

/// Dense cross-covariance k(a_i, b_j).
Matrix cross_gram(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

/// 0, 1, ..., T-1.
std::vector<double> regular_timestamps(std::size_t T, double step = 1.0);

}  // namespace gpvae
