#pragma once
// Missingness mechanisms: MCAR, spatially correlated (GP over the pixel
// grid), temporally correlated (GP over time), temporally repulsive (DPP over
// time) and value-dependent (MNAR).

#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpvae/data.hpp"

namespace gpvae {

enum class Mechanism { MCAR, Spatial, TemporalPos, TemporalNeg, MNAR };

std::string_view mechanism_name(Mechanism m);
Mechanism parse_mechanism(std::string_view name);

struct MaskSpec {
  Mechanism mechanism = Mechanism::MCAR;
  double target_rate = 0.5;
  /// RBF lengthscale, pixels (Spatial) or time units (TemporalPos).
  double lengthscale = 2.0;
  /// Lengthscale of the RBF similarity behind the DPP (TemporalNeg).
  double dpp_strength = 1.0;
  /// High values are this many times as likely to be missing (MNAR).
  double mnar_ratio = 2.0;
  /// MNAR high/low split; NaN selects the per-channel median of each series.
  double mnar_threshold = std::numeric_limits<double>::quiet_NaN();
  /// Frame shape for Spatial; 0 infers a square frame from the channel count.
  std::size_t height = 0, width = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// T x d indicators (row-major), 1 = missing.
struct Mask {
  std::size_t steps = 0, dim = 0;
  std::vector<std::uint8_t> missing;

  bool at(std::size_t t, std::size_t j) const { return missing[t * dim + j] != 0; }
  double rate() const;
};

Mask mcar_mask(std::size_t steps, std::size_t dim, double rate, std::uint64_t seed);

/// One frame (steps = 1, dim = height * width) cut from an RBF GP sample over
/// the pixel grid at the rate quantile. Grids beyond 64 x 64 are rejected.
Mask spatial_mask(std::size_t height, std::size_t width, double lengthscale, double rate, std::uint64_t seed);

/// Per channel, an RBF GP sample over time cut at the rate quantile.
Mask temporal_pos_mask(std::size_t steps, std::size_t dim, double lengthscale, double rate, std::uint64_t seed);

/// Indices drawn from the L-ensemble DPP with similarity L (symmetric PSD).
std::vector<std::size_t> dpp_sample(const Eigen::MatrixXd& L, std::mt19937_64& rng);
std::vector<std::size_t> dpp_sample(const Eigen::MatrixXd& L, std::uint64_t seed);

/// Marginal kernel L (L + I)^{-1}.
Eigen::MatrixXd dpp_marginal_kernel(const Eigen::MatrixXd& L);

/// Scale c with sum_i c l_i / (1 + c l_i) = expected_size for eigenvalues l.
double dpp_scale_for_size(std::span<const double> eigenvalues, double expected_size);

/// Per channel, missing steps drawn from a DPP whose RBF similarity
/// (lengthscale dpp_strength) is scaled to an expected size of rate * T.
Mask temporal_neg_mask(std::size_t steps, std::size_t dim, double dpp_strength, double rate, std::uint64_t seed);

/// values: T x d. Entries above the threshold (or the channel median when the
/// threshold is NaN) are `ratio` times as likely to be missing as the rest,
/// with the overall expected rate equal to `rate`. All-high or all-low input
/// falls back to MCAR and appends a warning (stderr when warnings is null).
Mask mnar_mask(std::span<const double> values, std::size_t dim, double rate, double ratio, std::uint64_t seed,
               double threshold = std::numeric_limits<double>::quiet_NaN(),
               std::vector<std::string>* warnings = nullptr);

/// Seed for a sub-stream (series, channel or frame) of a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

/// n x T x d indicators for a whole dataset, one independent stream per
/// series (and per channel or frame where the mechanism works on those).
std::vector<std::uint8_t> generate_mask(const MaskSpec& spec, const GroundTruth& truth,
                                        std::vector<std::string>* warnings = nullptr);

/// Mean over channels of the lag-1 autocorrelation of the missing indicator;
/// constant channels are skipped. mask: n x T x d.
double indicator_autocorrelation(std::span<const std::uint8_t> mask, std::size_t n, std::size_t steps,
                                 std::size_t dim);

struct MaskSet {
  std::size_t n = 0, steps = 0, dim = 0;
  std::vector<std::uint8_t> missing;
};

void save_mask(const MaskSet& mask, const std::filesystem::path& path);
MaskSet load_mask(const std::filesystem::path& path);
/// Columns series, time, then one 0/1 column per channel.
void export_mask_csv(const MaskSet& mask, const std::filesystem::path& path);

}  // namespace gpvae
