#pragma once
// Imputation metrics, a one-vs-rest logistic-regression probe and AUROC.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gpvae/nets.hpp"

namespace gpvae {

/// Mean of per-series values with its standard error.
struct MetricReport {
  std::string name;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Aggregates per-series values.
MetricReport summarize(std::string name, std::span<const double> per_series);

/// Squared error over missing entries (mask == 1), averaged within each
/// series and then across series. Series without missing entries are
/// skipped. Arrays are n x series_size.
MetricReport mse_missing(std::span<const double> imputed, std::span<const double> truth,
                         std::span<const std::uint8_t> mask, std::size_t series_size);

/// Per-entry negative log-likelihood over missing entries, aggregated like
/// mse_missing. predictions: means (Gaussian) or probabilities (Bernoulli).
MetricReport nll_missing_report(std::span<const double> predictions, std::span<const double> truth,
                                std::span<const std::uint8_t> mask, std::size_t series_size, Likelihood likelihood,
                                double sigma2);

struct LogisticConfig {
  double l2 = 1e-3;
  std::size_t iterations = 300;
  double learning_rate = 0.5;
};

/// One-vs-rest; weights[c] holds p coefficients followed by the intercept.
struct LogisticModel {
  std::vector<int> classes;
  std::size_t features = 0;
  std::vector<std::vector<double>> weights;

  /// n x classes.size() probabilities, row-major.
  std::vector<double> scores(std::span<const double> x) const;
};

/// Full-batch gradient descent on the mean log-loss plus l2/2 |w|^2 (the
/// intercept is not penalized). x: n x p row-major. Needs >= 2 classes.
LogisticModel train_logistic(std::span<const double> x, std::size_t p, std::span<const int> labels,
                             const LogisticConfig& config = {});

/// Probability that a positive outranks a negative; ties count 1/2.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> positive);

/// Mean one-vs-rest AUROC over the model's classes present in `labels`
/// (scores from LogisticModel::scores).
double macro_auroc(std::span<const double> scores, const LogisticModel& model, std::span<const int> labels);

/// Fits on the training features and scores the test features.
double downstream_auroc(std::span<const double> train_x, std::span<const int> train_y,
                        std::span<const double> test_x, std::span<const int> test_y, std::size_t p,
                        const LogisticConfig& config = {});

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Columns: model, metric, mean, std_error, n.
struct MetricRow {
  std::string model;
  MetricReport report;
};
void write_metrics_csv(std::span<const MetricRow> rows, const std::filesystem::path& path);
void write_metrics_json(std::span<const MetricRow> rows, const std::filesystem::path& path);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

}  // namespace gpvae
