#include "gpvae/kernels.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "gpvae/error.hpp"

namespace gpvae {

std::string_view kernel_family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::RBF:
      return "rbf";
    case KernelFamily::RationalQuadratic:
      return "rq";
    case KernelFamily::Cauchy:
      return "cauchy";
  }
  return "?";
}

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "rbf") return KernelFamily::RBF;
  if (name == "rq" || name == "rational_quadratic") return KernelFamily::RationalQuadratic;
  if (name == "cauchy") return KernelFamily::Cauchy;
  throw ConfigError("unknown kernel family '" + std::string(name) + "'");
}

KernelSpec KernelSpec::cauchy(double sigma2, double lengthscale) {
  KernelSpec s;
  s.family = KernelFamily::Cauchy;
  s.sigma2 = sigma2;
  s.lengthscale = lengthscale;
  return s;
}

KernelSpec KernelSpec::rbf(double sigma2, double lengthscale) {
  KernelSpec s;
  s.family = KernelFamily::RBF;
  s.sigma2 = sigma2;
  s.lengthscale = lengthscale;
  s.precision_lambda = 1.0 / (lengthscale * lengthscale);
  return s;
}

KernelSpec KernelSpec::rational_quadratic(double sigma2, double lengthscale, double alpha) {
  KernelSpec s;
  s.family = KernelFamily::RationalQuadratic;
  s.sigma2 = sigma2;
  s.lengthscale = lengthscale;
  s.alpha = alpha;
  return s;
}

void KernelSpec::validate() const {
  if (!(sigma2 > 0.0)) throw DomainError("kernel sigma2 must be positive");
  switch (family) {
    case KernelFamily::RBF:
      if (!(precision_lambda > 0.0)) throw DomainError("RBF precision lambda must be positive");
      break;
    case KernelFamily::RationalQuadratic:
      if (!(alpha > 0.0)) throw DomainError("rational quadratic alpha must be positive");
      [[fallthrough]];
    case KernelFamily::Cauchy:
      if (!(lengthscale > 0.0)) throw DomainError("kernel lengthscale must be positive");
      break;
  }
}

double KernelSpec::operator()(double tau, double tau_prime) const {
  const double r = tau - tau_prime;
  switch (family) {
    case KernelFamily::RBF:
      return sigma2 * gpvae::rbf(r, precision_lambda);
    case KernelFamily::RationalQuadratic:
      return sigma2 * gpvae::rational_quadratic(r, alpha, lengthscale);
    case KernelFamily::Cauchy:
      return gpvae::cauchy(tau, tau_prime, sigma2, lengthscale);
  }
  return 0.0;
}

double rbf(double r, double lambda) { return std::exp(-lambda * r * r / 2.0); }

// (1 + r^2 / (2 alpha beta^{-1}))^{-alpha} with l^2 = 2 beta^{-1}.
double rational_quadratic(double r, double alpha, double lengthscale) {
  return std::pow(1.0 + r * r / (alpha * lengthscale * lengthscale), -alpha);
}

double cauchy(double tau, double tau_prime, double sigma2, double lengthscale) {
  const double r = tau - tau_prime;
  return sigma2 / (1.0 + r * r / (lengthscale * lengthscale));
}

double GramFactor::log_det() const { return 2.0 * L.diagonal().array().log().sum(); }

Vector GramFactor::solve(const Vector& b) const {
  Vector y = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix GramFactor::solve(const Matrix& b) const {
  Matrix y = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix GramFactor::solve_lower(const Matrix& b) const { return L.triangularView<Eigen::Lower>().solve(b); }

namespace {

void check_increasing(std::span<const double> t) {
  if (t.empty()) throw DomainError("gram: need at least one timestamp");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw DomainError("gram: timestamps must be strictly increasing");
}

}  // namespace

Matrix cross_gram(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  Matrix K(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = spec(a[i], b[j]);
  return K;
}

GramFactor gram(const KernelSpec& spec, std::span<const double> timestamps) {
  spec.validate();
  check_increasing(timestamps);
  GramFactor f;
  f.timestamps.assign(timestamps.begin(), timestamps.end());
  f.K = cross_gram(spec, timestamps, timestamps);
  const auto n = f.K.rows();
  double jitter = spec.effective_jitter();
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Eigen::LLT<Matrix> llt(f.K + jitter * Matrix::Identity(n, n));
    if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
      f.L = llt.matrixL();
      f.jitter = jitter;
      return f;
    }
    jitter = jitter > 0.0 ? jitter * 10.0 : 1e-10 * spec.sigma2;
  }
  throw NumericError("gram: Cholesky failed after 3 jitter increases (ill-conditioned kernel?)");
}

GramFactor identity_gram(std::span<const double> timestamps) {
  check_increasing(timestamps);
  GramFactor f;
  f.timestamps.assign(timestamps.begin(), timestamps.end());
  const auto n = static_cast<Eigen::Index>(timestamps.size());
  f.K = Matrix::Identity(n, n);
  f.L = Matrix::Identity(n, n);
  return f;
}

std::vector<double> regular_timestamps(std::size_t T, double step) {
  std::vector<double> t(T);
  for (std::size_t i = 0; i < T; ++i) t[i] = static_cast<double>(i) * step;
  return t;
}

}  // namespace gpvae
