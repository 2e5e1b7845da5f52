#pragma once
// Datasets: batches of equally long multivariate series, the rotating-glyph
// generator, CSV ingestion/export, normalization, splits and binary
// containers.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gpvae {

/// Observed view of n series, each T steps x d channels (row-major n, T, d).
/// Missing entries (mask == 1) always hold 0 in `values`.
struct TimeSeriesBatch {
  std::size_t n = 0, steps = 0, dim = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;
  std::vector<double> timestamps;
  /// Empty, or one label per series.
  std::vector<int> labels;

  std::size_t series_size() const { return steps * dim; }
  std::size_t index(std::size_t i, std::size_t t, std::size_t j) const { return (i * steps + t) * dim + j; }
  std::span<const double> series_values(std::size_t i) const;
  std::span<const std::uint8_t> series_mask(std::size_t i) const;
  std::size_t missing_count() const;
  double missing_rate() const;

  /// Shapes, zero-fill, timestamps strictly increasing from 0.
  void validate() const;
};

/// Complete values; kept apart from TimeSeriesBatch so imputers never see it.
struct GroundTruth {
  std::size_t n = 0, steps = 0, dim = 0;
  std::vector<double> values;
  std::vector<double> timestamps;
  std::vector<int> labels;

  std::span<const double> series_values(std::size_t i) const;
};

/// Observed batch: truth with entries where `mask` is 1 removed (zeroed).
TimeSeriesBatch apply_mask(const GroundTruth& truth, std::span<const std::uint8_t> mask);
/// Fully observed batch.
TimeSeriesBatch observe_all(const GroundTruth& truth);

TimeSeriesBatch select(const TimeSeriesBatch& batch, std::span<const std::size_t> indices);
GroundTruth select(const GroundTruth& truth, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// Rotating glyphs

struct RotatingPatternsConfig {
  std::size_t n = 500;
  std::size_t steps = 10;
  std::size_t grid_size = 8;
  /// Standard deviation of the per-step rotation angle (radians).
  double rotation_std = 0.5;
  std::size_t label_count = 10;
  std::uint64_t seed = 0;
};

/// Each series shows one of `label_count` fixed binary glyphs on a
/// grid_size x grid_size frame (d = grid_size^2), starting upright and
/// rotated at each step by an N(0, rotation_std^2) increment. Values are 0/1.
GroundTruth generate_rotating_patterns(const RotatingPatternsConfig& config);

/// The upright glyph of a label, grid_size^2 values in {0, 1}.
std::vector<double> render_glyph(std::size_t label, std::size_t grid_size, double angle);

// ---------------------------------------------------------------------------
// CSV

/// Wide layout: one row per (series, time) with one column per channel.
struct CsvSchema {
  std::string id_column = "id";
  std::string time_column = "time";
  /// Optional integer class label column (constant within a series).
  std::string label_column;
  /// Channel columns; empty means every other column.
  std::vector<std::string> channels;
  /// > 0: times are binned to multiples of bin_width, keeping the latest
  /// value per bin. 0: the grid is the sorted union of distinct times.
  double bin_width = 0.0;
};

struct CsvLoadResult {
  TimeSeriesBatch batch;
  std::vector<std::string> series_ids;
  std::vector<std::string> channels;
  std::vector<std::string> warnings;
};

/// Empty cells are missing. Malformed rows and decreasing times within a
/// series raise ConfigError naming the line. Repeated (series, time, channel)
/// values: the last row wins and a warning is recorded.
CsvLoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

void export_csv(const TimeSeriesBatch& batch, const std::filesystem::path& path,
                std::span<const std::string> channel_names = {}, std::span<const std::string> series_ids = {});

// ---------------------------------------------------------------------------
// Normalization

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
};

/// Standardizes observed entries per channel; missing entries stay 0.
/// Without `stats`, they are computed from the observed entries of `batch`
/// (channels with std < 1e-12 or no observations get std 1).
std::pair<TimeSeriesBatch, NormStats> normalize(const TimeSeriesBatch& batch,
                                                const std::optional<NormStats>& stats = std::nullopt);
/// Inverse transform of observed entries.
TimeSeriesBatch denormalize(const TimeSeriesBatch& batch, const NormStats& stats);
/// Inverse transform applied to every entry of a dense n x T x d array.
std::vector<double> denormalize_values(std::span<const double> values, std::size_t dim, const NormStats& stats);

// ---------------------------------------------------------------------------
// Splits

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Disjoint and deterministic; stratified by label when labels exist.
/// A split with a positive fraction that ends up empty is an error.
SplitIndices split_indices(std::size_t n, std::span<const int> labels, std::array<double, 3> fractions,
                           std::uint64_t seed);

struct BatchSplit {
  TimeSeriesBatch train, val, test;
};
BatchSplit split(const TimeSeriesBatch& batch, std::array<double, 3> fractions, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Binary containers

void save_batch(const TimeSeriesBatch& batch, const std::filesystem::path& path);
TimeSeriesBatch load_batch(const std::filesystem::path& path);
void save_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_truth(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// IDX (MNIST) images

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

/// Magic 0x00000803, big-endian dimensions.
IdxImages read_idx_images(const std::filesystem::path& path);
/// Magic 0x00000801.
std::vector<int> read_idx_labels(const std::filesystem::path& path);

}  // namespace gpvae
