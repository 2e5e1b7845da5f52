#include "gpvae/missingness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "gpvae/binary_io.hpp"
#include "gpvae/error.hpp"

namespace gpvae {

namespace {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;

constexpr std::string_view kMaskMagic = "GPVMASK1";
constexpr std::size_t kMaxSpatialPixels = 64 * 64;

void check_rate(double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("missingness rate must lie in [0, 1]");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Draws from N(0, C) as A * eps with A A^T = C; tolerates singular C.
class GaussianField {
 public:
  explicit GaussianField(const Matrix& C) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
    if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of a mask covariance failed");
    A_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }

  Eigen::VectorXd draw(std::mt19937_64& rng) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd eps(A_.cols());
    for (Index i = 0; i < eps.size(); ++i) eps[i] = nd(rng);
    return A_ * eps;
  }

 private:
  Matrix A_;
};

// Marks the round(rate * n) largest entries; ties go to the lower index.
std::vector<std::uint8_t> top_quantile(const Eigen::VectorXd& sample, double rate) {
  const auto n = static_cast<std::size_t>(sample.size());
  const auto count = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sample[static_cast<Index>(a)] > sample[static_cast<Index>(b)];
  });
  std::vector<std::uint8_t> out(n, 0);
  for (std::size_t i = 0; i < count; ++i) out[order[i]] = 1;
  return out;
}

Matrix rbf_cov(std::span<const double> a, double lengthscale) {
  const auto n = static_cast<Index>(a.size());
  Matrix C(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double r = a[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(j)];
      C(i, j) = std::exp(-0.5 * r * r / (lengthscale * lengthscale));
    }
  return C;
}

Matrix grid_cov(std::size_t height, std::size_t width, double lengthscale) {
  const auto n = static_cast<Index>(height * width);
  Matrix C(n, n);
  for (Index p = 0; p < n; ++p)
    for (Index q = 0; q < n; ++q) {
      const double dr = static_cast<double>(p / static_cast<Index>(width)) - static_cast<double>(q / static_cast<Index>(width));
      const double dc = static_cast<double>(p % static_cast<Index>(width)) - static_cast<double>(q % static_cast<Index>(width));
      C(p, q) = std::exp(-0.5 * (dr * dr + dc * dc) / (lengthscale * lengthscale));
    }
  return C;
}

void check_grid(std::size_t height, std::size_t width, double lengthscale) {
  if (!(lengthscale > 0.0)) throw DomainError("spatial mask lengthscale must be positive");
  if (height == 0 || width == 0) throw ShapeError("spatial mask grid must be nonempty");
  if (height > 64 || width > 64 || height * width > kMaxSpatialPixels)
    throw ShapeError("spatial mask grid larger than 64 x 64 is not supported");
}

// Temporal DPP with precomputed spectrum, shared across channels.
class TemporalDpp {
 public:
  TemporalDpp(std::size_t steps, double strength, double rate) {
    if (!(strength > 0.0)) throw DomainError("dpp_strength must be positive");
    std::vector<double> t(steps);
    std::iota(t.begin(), t.end(), 0.0);
    const Matrix S = rbf_cov(t, strength);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
    if (eig.info() != Eigen::Success) throw NumericError("DPP eigendecomposition failed");
    std::vector<double> lambda(eig.eigenvalues().data(), eig.eigenvalues().data() + steps);
    for (double& l : lambda) l = std::max(l, 0.0);
    const double c = dpp_scale_for_size(lambda, rate * static_cast<double>(steps));
    L_ = c * S;
  }
  const Matrix& L() const { return L_; }

 private:
  Matrix L_;
};

}  // namespace

std::string_view mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::MCAR:
      return "mcar";
    case Mechanism::Spatial:
      return "spatial";
    case Mechanism::TemporalPos:
      return "temporal_pos";
    case Mechanism::TemporalNeg:
      return "temporal_neg";
    case Mechanism::MNAR:
      return "mnar";
  }
  return "?";
}

Mechanism parse_mechanism(std::string_view name) {
  for (Mechanism m : {Mechanism::MCAR, Mechanism::Spatial, Mechanism::TemporalPos, Mechanism::TemporalNeg,
                      Mechanism::MNAR})
    if (mechanism_name(m) == name) return m;
  throw ConfigError("unknown missingness mechanism '" + std::string(name) + "'");
}

void MaskSpec::validate() const {
  if (!(target_rate >= 0.0 && target_rate <= 1.0)) throw ConfigError("mask rate must lie in [0, 1]");
  if (!(mnar_ratio > 0.0)) throw ConfigError("mnar_ratio must be positive");
  if (!(lengthscale > 0.0)) throw ConfigError("mask lengthscale must be positive");
  if (!(dpp_strength > 0.0)) throw ConfigError("dpp_strength must be positive");
}

double Mask::rate() const {
  if (missing.empty()) return 0.0;
  return static_cast<double>(std::count(missing.begin(), missing.end(), 1)) / static_cast<double>(missing.size());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ (a + 1)) ^ (b + 0x632be59bd9b4e019ULL));
}

Mask mcar_mask(std::size_t steps, std::size_t dim, double rate, std::uint64_t seed) {
  check_rate(rate);
  Mask m{steps, dim, std::vector<std::uint8_t>(steps * dim)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& v : m.missing) v = u(rng) < rate ? 1 : 0;
  return m;
}

Mask spatial_mask(std::size_t height, std::size_t width, double lengthscale, double rate, std::uint64_t seed) {
  check_rate(rate);
  check_grid(height, width, lengthscale);
  const GaussianField field(grid_cov(height, width, lengthscale));
  std::mt19937_64 rng(seed);
  return Mask{1, height * width, top_quantile(field.draw(rng), rate)};
}

Mask temporal_pos_mask(std::size_t steps, std::size_t dim, double lengthscale, double rate, std::uint64_t seed) {
  check_rate(rate);
  if (!(lengthscale > 0.0)) throw DomainError("temporal mask lengthscale must be positive");
  std::vector<double> t(steps);
  std::iota(t.begin(), t.end(), 0.0);
  const GaussianField field(rbf_cov(t, lengthscale));
  Mask m{steps, dim, std::vector<std::uint8_t>(steps * dim)};
  for (std::size_t j = 0; j < dim; ++j) {
    std::mt19937_64 rng(derive_seed(seed, j));
    const auto col = top_quantile(field.draw(rng), rate);
    for (std::size_t s = 0; s < steps; ++s) m.missing[s * dim + j] = col[s];
  }
  return m;
}

std::vector<std::size_t> dpp_sample(const Eigen::MatrixXd& L, std::mt19937_64& rng) {
  if (L.rows() != L.cols()) throw ShapeError("dpp_sample: L must be square");
  if (L.rows() == 0) return {};
  if ((L - L.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + L.cwiseAbs().maxCoeff()))
    throw DomainError("dpp_sample: L must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(L);
  if (eig.info() != Eigen::Success) throw NumericError("dpp_sample: eigendecomposition failed");

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Index> chosen;
  for (Index i = 0; i < L.rows(); ++i) {
    const double l = std::max(eig.eigenvalues()[i], 0.0);
    if (u(rng) < l / (1.0 + l)) chosen.push_back(i);
  }
  Matrix V(L.rows(), static_cast<Index>(chosen.size()));
  for (std::size_t c = 0; c < chosen.size(); ++c) V.col(static_cast<Index>(c)) = eig.eigenvectors().col(chosen[c]);

  std::vector<std::size_t> items;
  while (V.cols() > 0) {
    const Eigen::VectorXd p = V.rowwise().squaredNorm() / static_cast<double>(V.cols());
    double r = u(rng) * p.sum();
    Index item = 0;
    for (; item < p.size() - 1; ++item) {
      r -= p[item];
      if (r < 0.0) break;
    }
    items.push_back(static_cast<std::size_t>(item));

    Index pivot = 0;
    V.row(item).cwiseAbs().maxCoeff(&pivot);
    const Eigen::VectorXd vp = V.col(pivot);
    const double denom = vp[item];
    V -= vp * (V.row(item) / denom);
    // Drop the pivot column, which is now zero.
    if (pivot != V.cols() - 1) V.col(pivot) = V.col(V.cols() - 1);
    V.conservativeResize(Eigen::NoChange, V.cols() - 1);
    // Gram-Schmidt.
    for (Index c = 0; c < V.cols(); ++c) {
      for (Index k = 0; k < c; ++k) V.col(c) -= V.col(k).dot(V.col(c)) * V.col(k);
      const double norm = V.col(c).norm();
      if (norm > 1e-12) V.col(c) /= norm;
    }
  }
  std::sort(items.begin(), items.end());
  return items;
}

std::vector<std::size_t> dpp_sample(const Eigen::MatrixXd& L, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return dpp_sample(L, rng);
}

Eigen::MatrixXd dpp_marginal_kernel(const Eigen::MatrixXd& L) {
  // L and (L + I)^{-1} commute.
  return (L + Matrix::Identity(L.rows(), L.cols())).ldlt().solve(L);
}

double dpp_scale_for_size(std::span<const double> eigenvalues, double expected_size) {
  const auto size_at = [&](double c) {
    double s = 0.0;
    for (double l : eigenvalues) s += c * l / (1.0 + c * l);
    return s;
  };
  if (expected_size <= 0.0) return 0.0;
  double lo = -30.0, hi = 30.0;  // log10 scale
  if (size_at(std::pow(10.0, hi)) <= expected_size) return std::pow(10.0, hi);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (size_at(std::pow(10.0, mid)) < expected_size ? lo : hi) = mid;
  }
  return std::pow(10.0, 0.5 * (lo + hi));
}

Mask temporal_neg_mask(std::size_t steps, std::size_t dim, double dpp_strength, double rate, std::uint64_t seed) {
  check_rate(rate);
  Mask m{steps, dim, std::vector<std::uint8_t>(steps * dim)};
  if (steps == 0) return m;
  const TemporalDpp dpp(steps, dpp_strength, rate);
  for (std::size_t j = 0; j < dim; ++j) {
    std::mt19937_64 rng(derive_seed(seed, j));
    for (std::size_t s : dpp_sample(dpp.L(), rng)) m.missing[s * dim + j] = 1;
  }
  return m;
}

Mask mnar_mask(std::span<const double> values, std::size_t dim, double rate, double ratio, std::uint64_t seed,
               double threshold, std::vector<std::string>* warnings) {
  check_rate(rate);
  if (!(ratio > 0.0)) throw DomainError("mnar ratio must be positive");
  if (dim == 0 || values.size() % dim != 0) throw ShapeError("mnar_mask: values are not T x d");
  const std::size_t steps = values.size() / dim;

  std::vector<std::uint8_t> high(values.size());
  std::vector<double> col(steps);
  for (std::size_t j = 0; j < dim; ++j) {
    double cut = threshold;
    if (std::isnan(cut)) {
      for (std::size_t s = 0; s < steps; ++s) col[s] = values[s * dim + j];
      std::sort(col.begin(), col.end());
      cut = steps % 2 ? col[steps / 2] : 0.5 * (col[steps / 2 - 1] + col[steps / 2]);
    }
    for (std::size_t s = 0; s < steps; ++s) high[s * dim + j] = values[s * dim + j] > cut ? 1 : 0;
  }
  const auto n_high = static_cast<double>(std::count(high.begin(), high.end(), 1));
  const double f_hi = n_high / static_cast<double>(values.size());
  const double f_lo = 1.0 - f_hi;
  if (f_hi == 0.0 || f_lo == 0.0) {
    const std::string msg = "mnar_mask: input is all high or all low; using MCAR";
    if (warnings)
      warnings->push_back(msg);
    else
      std::cerr << "warning: " << msg << '\n';
    return mcar_mask(steps, dim, rate, seed);
  }
  double p_hi = rate / (f_hi + f_lo / ratio);
  double p_lo = p_hi / ratio;
  if (p_hi > 1.0) {
    p_hi = 1.0;
    p_lo = std::clamp((rate - f_hi) / f_lo, 0.0, 1.0);
  } else if (p_lo > 1.0) {
    p_lo = 1.0;
    p_hi = std::clamp((rate - f_lo) / f_hi, 0.0, 1.0);
  }
  Mask m{steps, dim, std::vector<std::uint8_t>(values.size())};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k < values.size(); ++k) m.missing[k] = u(rng) < (high[k] ? p_hi : p_lo) ? 1 : 0;
  return m;
}

std::vector<std::uint8_t> generate_mask(const MaskSpec& spec, const GroundTruth& truth,
                                        std::vector<std::string>* warnings) {
  spec.validate();
  const std::size_t T = truth.steps, d = truth.dim, block = T * d;
  std::vector<std::uint8_t> out(truth.n * block);
  const auto put = [&](std::size_t i, const Mask& m) {
    std::copy(m.missing.begin(), m.missing.end(), out.begin() + static_cast<std::ptrdiff_t>(i * block));
  };

  switch (spec.mechanism) {
    case Mechanism::MCAR:
      for (std::size_t i = 0; i < truth.n; ++i) put(i, mcar_mask(T, d, spec.target_rate, derive_seed(spec.seed, i)));
      break;
    case Mechanism::Spatial: {
      std::size_t h = spec.height, w = spec.width;
      if (h == 0 && w == 0) {
        h = w = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
      }
      if (h * w != d)
        throw ConfigError("spatial mask: frame " + std::to_string(h) + "x" + std::to_string(w) + " does not match " +
                          std::to_string(d) + " channels");
      check_grid(h, w, spec.lengthscale);
      const GaussianField field(grid_cov(h, w, spec.lengthscale));
      for (std::size_t i = 0; i < truth.n; ++i)
        for (std::size_t t = 0; t < T; ++t) {
          std::mt19937_64 rng(derive_seed(spec.seed, i, t));
          const auto frame = top_quantile(field.draw(rng), spec.target_rate);
          std::copy(frame.begin(), frame.end(), out.begin() + static_cast<std::ptrdiff_t>(i * block + t * d));
        }
      break;
    }
    case Mechanism::TemporalPos: {
      const GaussianField field(rbf_cov(truth.timestamps, spec.lengthscale));
      for (std::size_t i = 0; i < truth.n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          std::mt19937_64 rng(derive_seed(spec.seed, i, j));
          const auto col = top_quantile(field.draw(rng), spec.target_rate);
          for (std::size_t t = 0; t < T; ++t) out[i * block + t * d + j] = col[t];
        }
      break;
    }
    case Mechanism::TemporalNeg: {
      if (T == 0) break;
      const TemporalDpp dpp(T, spec.dpp_strength, spec.target_rate);
      for (std::size_t i = 0; i < truth.n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          std::mt19937_64 rng(derive_seed(spec.seed, i, j));
          for (std::size_t t : dpp_sample(dpp.L(), rng)) out[i * block + t * d + j] = 1;
        }
      break;
    }
    case Mechanism::MNAR:
      for (std::size_t i = 0; i < truth.n; ++i)
        put(i, mnar_mask(truth.series_values(i), d, spec.target_rate, spec.mnar_ratio, derive_seed(spec.seed, i),
                         spec.mnar_threshold, warnings));
      break;
  }
  return out;
}

double indicator_autocorrelation(std::span<const std::uint8_t> mask, std::size_t n, std::size_t steps,
                                 std::size_t dim) {
  if (mask.size() != n * steps * dim) throw ShapeError("indicator_autocorrelation: mask size mismatch");
  double total = 0.0;
  std::size_t channels = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      const auto at = [&](std::size_t t) { return static_cast<double>(mask[(i * steps + t) * dim + j]); };
      double mean = 0.0;
      for (std::size_t t = 0; t < steps; ++t) mean += at(t);
      mean /= static_cast<double>(steps);
      double var = 0.0, cov = 0.0;
      for (std::size_t t = 0; t < steps; ++t) var += (at(t) - mean) * (at(t) - mean);
      for (std::size_t t = 0; t + 1 < steps; ++t) cov += (at(t) - mean) * (at(t + 1) - mean);
      if (var <= 0.0) continue;
      total += cov / var;
      ++channels;
    }
  return channels ? total / static_cast<double>(channels) : 0.0;
}

void save_mask(const MaskSet& mask, const std::filesystem::path& path) {
  if (mask.missing.size() != mask.n * mask.steps * mask.dim) throw ShapeError("save_mask: size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  io::write_magic(os, kMaskMagic);
  io::write<std::uint64_t>(os, mask.n);
  io::write<std::uint64_t>(os, mask.steps);
  io::write<std::uint64_t>(os, mask.dim);
  const auto packed = io::pack_bits(mask.missing);
  os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

MaskSet load_mask(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::expect_magic(is, kMaskMagic, "mask");
  MaskSet m;
  m.n = io::read<std::uint64_t>(is);
  m.steps = io::read<std::uint64_t>(is);
  m.dim = io::read<std::uint64_t>(is);
  const std::size_t count = m.n * m.steps * m.dim;
  std::vector<std::uint8_t> packed((count + 7) / 8);
  is.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!is) throw IoError("truncated mask file " + path.string());
  m.missing = io::unpack_bits(packed, count);
  return m;
}

void export_mask_csv(const MaskSet& mask, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "series,time";
  for (std::size_t j = 0; j < mask.dim; ++j) os << ",c" << j;
  os << '\n';
  for (std::size_t i = 0; i < mask.n; ++i)
    for (std::size_t t = 0; t < mask.steps; ++t) {
      os << i << ',' << t;
      for (std::size_t j = 0; j < mask.dim; ++j) os << ',' << int(mask.missing[(i * mask.steps + t) * mask.dim + j]);
      os << '\n';
    }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace gpvae
