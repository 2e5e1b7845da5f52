#include "gpvae/structured_gaussian.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "gpvae/error.hpp"

namespace gpvae {

namespace {

void check_band(std::span<const double> diag, std::span<const double> off) {
  if (diag.empty()) throw ShapeError("band: empty diagonal");
  if (off.size() + 1 != diag.size())
    throw ShapeError("band: off-diagonal length " + std::to_string(off.size()) + " for T=" +
                     std::to_string(diag.size()));
  for (double b : diag)
    if (!(b > 0.0)) throw DomainError("band: diagonal entries must be positive, got " + std::to_string(b));
}

template <class M>
std::span<const double> row_span(const M& m, std::size_t j) {
  return {m.data() + j * static_cast<std::size_t>(m.cols()), static_cast<std::size_t>(m.cols())};
}

// Columns of B^{-1} (upper triangular), one back-substitution per column.
Matrix band_inverse(std::span<const double> diag, std::span<const double> off) {
  const std::size_t T = diag.size();
  Matrix inv = Matrix::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T));
  for (std::size_t c = 0; c < T; ++c) {
    auto col = inv.col(static_cast<Eigen::Index>(c));
    col(static_cast<Eigen::Index>(c)) = 1.0 / diag[c];
    for (std::size_t t = c; t-- > 0;)
      col(static_cast<Eigen::Index>(t)) = -off[t] * col(static_cast<Eigen::Index>(t + 1)) / diag[t];
  }
  return inv;
}

}  // namespace

std::span<const double> StructuredPosterior::mean(std::size_t j) const { return row_span(means, j); }
std::span<const double> StructuredPosterior::diag(std::size_t j) const { return row_span(band_diag, j); }
std::span<const double> StructuredPosterior::off(std::size_t j) const { return row_span(band_off, j); }

void StructuredPosterior::validate() const {
  const auto k = means.rows();
  const auto T = means.cols();
  if (T < 1) throw ShapeError("posterior: need T >= 1");
  if (band_diag.rows() != k || band_diag.cols() != T || band_off.rows() != k || band_off.cols() != T - 1)
    throw ShapeError("posterior: band shapes do not match means");
  if (!(band_diag.array() > 0.0).all()) throw DomainError("posterior: band diagonal must be positive");
}

Matrix band_matrix(std::span<const double> diag, std::span<const double> off) {
  if (off.size() + 1 != diag.size()) throw ShapeError("band_matrix: off-diagonal length must be T-1");
  const auto T = static_cast<Eigen::Index>(diag.size());
  Matrix B = Matrix::Zero(T, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    B(t, t) = diag[static_cast<std::size_t>(t)];
    if (t + 1 < T) B(t, t + 1) = off[static_cast<std::size_t>(t)];
  }
  return B;
}

// (B^T B)_{t,t} = b_{t-1,t}^2 + b_{t,t}^2, (B^T B)_{t,t+1} = b_{t,t} b_{t,t+1}.
Matrix assemble_precision(std::span<const double> diag, std::span<const double> off) {
  check_band(diag, off);
  const std::size_t T = diag.size();
  Matrix P = Matrix::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T));
  for (std::size_t t = 0; t < T; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    P(i, i) = diag[t] * diag[t] + (t > 0 ? off[t - 1] * off[t - 1] : 0.0);
    if (t + 1 < T) {
      P(i, i + 1) = diag[t] * off[t];
      P(i + 1, i) = P(i, i + 1);
    }
  }
  return P;
}

void bidiag_solve(std::span<const double> diag, std::span<const double> off, std::span<const double> rhs,
                  std::span<double> x) {
  const std::size_t T = diag.size();
  if (rhs.size() != T || x.size() != T || off.size() + 1 != T) throw ShapeError("bidiag_solve: length mismatch");
  for (std::size_t t = T; t-- > 0;) {
    if (diag[t] == 0.0) throw DomainError("bidiag_solve: zero diagonal entry");
    const double carry = t + 1 < T ? off[t] * x[t + 1] : 0.0;
    x[t] = (rhs[t] - carry) / diag[t];
  }
}

void bidiag_solve_transpose(std::span<const double> diag, std::span<const double> off,
                            std::span<const double> rhs, std::span<double> u) {
  const std::size_t T = diag.size();
  if (rhs.size() != T || u.size() != T || off.size() + 1 != T)
    throw ShapeError("bidiag_solve_transpose: length mismatch");
  for (std::size_t t = 0; t < T; ++t) {
    if (diag[t] == 0.0) throw DomainError("bidiag_solve_transpose: zero diagonal entry");
    const double carry = t > 0 ? off[t - 1] * u[t - 1] : 0.0;
    u[t] = (rhs[t] - carry) / diag[t];
  }
}

std::vector<double> sample(const StructuredPosterior& post, std::size_t j, std::span<const double> eps) {
  if (j >= post.latent_dim()) throw ShapeError("sample: latent index out of range");
  const auto m = post.mean(j);
  std::vector<double> z(m.size());
  bidiag_solve(post.diag(j), post.off(j), eps, z);
  for (std::size_t t = 0; t < z.size(); ++t) z[t] += m[t];
  return z;
}

double log_det_precision(const StructuredPosterior& post, std::size_t j) {
  double s = 0.0;
  for (double b : post.diag(j)) s += std::log(b);
  return 2.0 * s;
}

double kl_to_prior(std::span<const double> mean, std::span<const double> diag, std::span<const double> off,
                   const GramFactor& prior) {
  check_band(diag, off);
  const std::size_t T = diag.size();
  if (mean.size() != T || prior.size() != T)
    throw ShapeError("kl_to_prior: posterior length " + std::to_string(T) + " vs prior " +
                     std::to_string(prior.size()));
  const Matrix binv = band_inverse(diag, off);
  // tr(K^{-1} Sigma) = ||L^{-1} B^{-1}||_F^2
  const double trace = prior.solve_lower(binv).squaredNorm();
  const Eigen::Map<const Vector> m(mean.data(), static_cast<Eigen::Index>(T));
  const double quad = prior.solve_lower(m).squaredNorm();
  double log_det_lambda = 0.0;
  for (double b : diag) log_det_lambda += 2.0 * std::log(b);
  return 0.5 * (trace + quad - static_cast<double>(T) + prior.log_det() + log_det_lambda);
}

KlGradient kl_to_prior_with_grad(std::span<const double> mean, std::span<const double> diag,
                                 std::span<const double> off, const GramFactor& prior) {
  check_band(diag, off);
  const std::size_t T = diag.size();
  if (mean.size() != T || prior.size() != T)
    throw ShapeError("kl_to_prior: posterior length " + std::to_string(T) + " vs prior " +
                     std::to_string(prior.size()));
  const Matrix binv = band_inverse(diag, off);
  const Matrix kinv_binv = prior.solve(binv);
  const Eigen::Map<const Vector> m(mean.data(), static_cast<Eigen::Index>(T));
  const Vector kinv_m = prior.solve(Vector(m));

  double log_det_lambda = 0.0;
  for (double b : diag) log_det_lambda += 2.0 * std::log(b);

  KlGradient g;
  const double trace = (binv.array() * kinv_binv.array()).sum();
  g.value = 0.5 * (trace + m.dot(kinv_m) - static_cast<double>(T) + prior.log_det() + log_det_lambda);

  // d/dB of 0.5 tr(K^{-1} B^{-1} B^{-T}) is -B^{-T} K^{-1} Sigma; only the
  // band entries are free parameters.
  const Matrix G = binv.transpose() * kinv_binv * binv.transpose();
  g.d_mean.assign(kinv_m.data(), kinv_m.data() + T);
  g.d_diag.resize(T);
  g.d_off.resize(T - 1);
  for (std::size_t t = 0; t < T; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    g.d_diag[t] = -G(i, i) + 1.0 / diag[t];
    if (t + 1 < T) g.d_off[t] = -G(i, i + 1);
  }
  return g;
}

double kl_to_prior(const StructuredPosterior& post, std::size_t j, const GramFactor& prior) {
  if (j >= post.latent_dim()) throw ShapeError("kl_to_prior: latent index out of range");
  return kl_to_prior(post.mean(j), post.diag(j), post.off(j), prior);
}

double total_kl(const StructuredPosterior& post, const GramFactor& prior) {
  double s = 0.0;
  for (std::size_t j = 0; j < post.latent_dim(); ++j) s += kl_to_prior(post, j, prior);
  return s;
}

GramFactor gram_from_covariance(const Matrix& K, std::vector<double> timestamps) {
  if (K.rows() != K.cols() || static_cast<std::size_t>(K.rows()) != timestamps.size())
    throw ShapeError("gram_from_covariance: size mismatch");
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) throw NumericError("gram_from_covariance: matrix not positive definite");
  GramFactor f;
  f.K = K;
  f.L = llt.matrixL();
  f.timestamps = std::move(timestamps);
  return f;
}

// ---------------------------------------------------------------------------
// Differentiable ops

namespace {

struct RowDims {
  std::size_t rows, steps;
};

RowDims check_rows(const ad::Tensor& mean, const ad::Tensor& diag, const ad::Tensor& off, const char* who) {
  if (mean.rank() != 2 || diag.shape() != mean.shape() || off.rank() != 2 || off.dim(0) != mean.dim(0) ||
      off.dim(1) + 1 != mean.dim(1))
    throw ShapeError(std::string(who) + ": expected mean/diag [R,T] and off [R,T-1], got " +
                     ad::shape_str(mean.shape()) + ", " + ad::shape_str(diag.shape()) + ", " +
                     ad::shape_str(off.shape()));
  return {mean.dim(0), mean.dim(1)};
}

std::span<const double> row(const ad::Tensor& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return t.data().subspan(r * w, w);
}

std::span<double> row(ad::Tensor& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return t.data().subspan(r * w, w);
}

class BandSampleOp final : public ad::CustomOp {
 public:
  std::string_view name() const override { return "band_sample"; }

  ad::Tensor forward(std::span<const ad::Tensor* const> in) const override {
    const auto [R, T] = check_rows(*in[0], *in[1], *in[2], "band_sample");
    if (in[3]->shape() != in[0]->shape()) throw ShapeError("band_sample: noise shape must match mean");
    ad::Tensor z(in[0]->shape());
    for (std::size_t r = 0; r < R; ++r) {
      auto zr = row(z, r);
      check_band(row(*in[1], r), row(*in[2], r));
      bidiag_solve(row(*in[1], r), row(*in[2], r), row(*in[3], r), zr);
      const auto m = row(*in[0], r);
      for (std::size_t t = 0; t < T; ++t) zr[t] += m[t];
    }
    return z;
  }

  void backward(std::span<const ad::Tensor* const> in, const ad::Tensor& out, const ad::Tensor& gout,
                std::span<ad::Tensor* const> gin) const override {
    const std::size_t R = out.dim(0), T = out.dim(1);
    std::vector<double> x(T), u(T);
    for (std::size_t r = 0; r < R; ++r) {
      const auto m = row(*in[0], r);
      const auto z = row(out, r);
      const auto g = row(gout, r);
      for (std::size_t t = 0; t < T; ++t) x[t] = z[t] - m[t];
      if (gin[0]) {
        auto gm = row(*gin[0], r);
        for (std::size_t t = 0; t < T; ++t) gm[t] += g[t];
      }
      // x = B^{-1} eps  =>  dL/dB = -B^{-T} g x^T, dL/deps = B^{-T} g
      bidiag_solve_transpose(row(*in[1], r), row(*in[2], r), g, u);
      if (gin[1]) {
        auto gd = row(*gin[1], r);
        for (std::size_t t = 0; t < T; ++t) gd[t] -= u[t] * x[t];
      }
      if (gin[2]) {
        auto go = row(*gin[2], r);
        for (std::size_t t = 0; t + 1 < T; ++t) go[t] -= u[t] * x[t + 1];
      }
      if (gin[3]) {
        auto ge = row(*gin[3], r);
        for (std::size_t t = 0; t < T; ++t) ge[t] += u[t];
      }
    }
  }
};

class BandKlOp final : public ad::CustomOp {
 public:
  explicit BandKlOp(std::shared_ptr<const GramFactor> prior) : prior_(std::move(prior)) {}

  std::string_view name() const override { return "band_kl"; }

  ad::Tensor forward(std::span<const ad::Tensor* const> in) const override {
    const auto [R, T] = check_rows(*in[0], *in[1], *in[2], "band_kl");
    (void)T;
    double s = 0.0;
    for (std::size_t r = 0; r < R; ++r) s += kl_to_prior(row(*in[0], r), row(*in[1], r), row(*in[2], r), *prior_);
    return ad::Tensor::scalar(s);
  }

  void backward(std::span<const ad::Tensor* const> in, const ad::Tensor&, const ad::Tensor& gout,
                std::span<ad::Tensor* const> gin) const override {
    const std::size_t R = in[0]->dim(0);
    const double g = gout[0];
    for (std::size_t r = 0; r < R; ++r) {
      const KlGradient kg = kl_to_prior_with_grad(row(*in[0], r), row(*in[1], r), row(*in[2], r), *prior_);
      auto accumulate = [g](ad::Tensor* dst, std::size_t rr, const std::vector<double>& src) {
        if (!dst) return;
        auto d = row(*dst, rr);
        for (std::size_t t = 0; t < src.size(); ++t) d[t] += g * src[t];
      };
      accumulate(gin[0], r, kg.d_mean);
      accumulate(gin[1], r, kg.d_diag);
      accumulate(gin[2], r, kg.d_off);
    }
  }

 private:
  std::shared_ptr<const GramFactor> prior_;
};

}  // namespace

ad::Var band_sample(ad::Var mean, ad::Var diag, ad::Var off, ad::Var eps) {
  static const auto op = std::make_shared<const BandSampleOp>();
  return ad::apply(op, {mean, diag, off, eps});
}

ad::Var band_kl(ad::Var mean, ad::Var diag, ad::Var off, std::shared_ptr<const GramFactor> prior) {
  if (!prior) throw Error("band_kl: null prior");
  return ad::apply(std::make_shared<const BandKlOp>(std::move(prior)), {mean, diag, off});
}

}  // namespace gpvae
