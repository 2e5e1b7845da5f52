#include "gpvae/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "gpvae/error.hpp"
#include "gpvae/simd.hpp"

namespace gpvae {

namespace {

void check_arrays(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> mask,
                  std::size_t series_size) {
  if (a.size() != b.size() || mask.size() != b.size()) throw ShapeError("metric inputs differ in length");
  if (series_size == 0 || b.size() % series_size != 0) throw ShapeError("metric inputs are not n x series_size");
}

template <class F>
MetricReport per_series_metric(std::string name, std::span<const double> a, std::span<const double> b,
                               std::span<const std::uint8_t> mask, std::size_t series_size, F entry) {
  check_arrays(a, b, mask, series_size);
  std::vector<double> values;
  for (std::size_t start = 0; start < b.size(); start += series_size) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = start; k < start + series_size; ++k)
      if (mask[k]) {
        sum += entry(a[k], b[k]);
        ++count;
      }
    if (count) values.push_back(sum / static_cast<double>(count));
  }
  if (values.empty()) throw DomainError(name + ": no missing entries to score");
  return summarize(std::move(name), values);
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

MetricReport summarize(std::string name, std::span<const double> per_series) {
  MetricReport r;
  r.name = std::move(name);
  r.n = per_series.size();
  if (r.n == 0) return r;
  r.mean = std::accumulate(per_series.begin(), per_series.end(), 0.0) / static_cast<double>(r.n);
  if (r.n > 1) {
    double ss = 0.0;
    for (double v : per_series) ss += (v - r.mean) * (v - r.mean);
    r.std_error = std::sqrt(ss / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
  }
  return r;
}

MetricReport mse_missing(std::span<const double> imputed, std::span<const double> truth,
                         std::span<const std::uint8_t> mask, std::size_t series_size) {
  return per_series_metric("mse", imputed, truth, mask, series_size, [](double a, double b) {
    return (a - b) * (a - b);
  });
}

MetricReport nll_missing_report(std::span<const double> predictions, std::span<const double> truth,
                                std::span<const std::uint8_t> mask, std::size_t series_size, Likelihood likelihood,
                                double sigma2) {
  if (likelihood == Likelihood::Gaussian) {
    if (!(sigma2 > 0.0)) throw DomainError("nll: sigma2 must be positive");
    const double c = 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
    return per_series_metric("nll", predictions, truth, mask, series_size, [&](double pred, double x) {
      return c + (x - pred) * (x - pred) / (2.0 * sigma2);
    });
  }
  return per_series_metric("nll", predictions, truth, mask, series_size, [](double pred, double x) {
    const double p = std::clamp(pred, 1e-12, 1.0 - 1e-12);
    return -(x * std::log(p) + (1.0 - x) * std::log1p(-p));
  });
}

std::vector<double> LogisticModel::scores(std::span<const double> x) const {
  if (features == 0 || x.size() % features != 0) throw ShapeError("logistic scores: features do not match");
  const std::size_t n = x.size() / features, C = classes.size();
  std::vector<double> out(n * C);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < C; ++c) {
      const auto& w = weights[c];
      const double z = simd::dot(x.subspan(i * features, features), std::span<const double>(w.data(), features));
      out[i * C + c] = sigmoid(z + w[features]);
    }
  return out;
}

LogisticModel train_logistic(std::span<const double> x, std::size_t p, std::span<const int> labels,
                             const LogisticConfig& config) {
  if (p == 0 || x.size() != labels.size() * p) throw ShapeError("train_logistic: x must be n x p");
  LogisticModel model;
  model.features = p;
  model.classes.assign(labels.begin(), labels.end());
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2) throw DomainError("train_logistic: at least two classes are required");

  const std::size_t n = labels.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> residual(n), grad(p + 1);
  for (int cls : model.classes) {
    std::vector<double> w(p + 1, 0.0);
    for (std::size_t it = 0; it < config.iterations; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const double z = simd::dot(x.subspan(i * p, p), std::span<const double>(w.data(), p)) + w[p];
        residual[i] = sigmoid(z) - (labels[i] == cls ? 1.0 : 0.0);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        simd::axpy(residual[i] * inv_n, x.subspan(i * p, p), std::span<double>(grad.data(), p));
        grad[p] += residual[i] * inv_n;
      }
      for (std::size_t k = 0; k < p; ++k) grad[k] += config.l2 * w[k];
      for (std::size_t k = 0; k <= p; ++k) w[k] -= config.learning_rate * grad[k];
    }
    model.weights.push_back(std::move(w));
  }
  return model;
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw ShapeError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks (1-based) over tie groups.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DomainError("auroc: both classes must be present");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double macro_auroc(std::span<const double> scores, const LogisticModel& model, std::span<const int> labels) {
  const std::size_t C = model.classes.size();
  if (scores.size() != labels.size() * C) throw ShapeError("macro_auroc: scores must be n x classes");
  std::vector<double> col(labels.size());
  std::vector<std::uint8_t> pos(labels.size());
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = scores[i * C + c];
      pos[i] = labels[i] == model.classes[c];
      n_pos += pos[i];
    }
    if (n_pos == 0 || n_pos == labels.size()) continue;
    total += auroc(col, pos);
    ++used;
  }
  if (used == 0) throw DomainError("macro_auroc: no class has both positives and negatives");
  return total / static_cast<double>(used);
}

double downstream_auroc(std::span<const double> train_x, std::span<const int> train_y,
                        std::span<const double> test_x, std::span<const int> test_y, std::size_t p,
                        const LogisticConfig& config) {
  const LogisticModel model = train_logistic(train_x, p, train_y, config);
  return macro_auroc(model.scores(test_x), model, test_y);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_metrics_csv(std::span<const MetricRow> rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "model,metric,mean,std_error,n\n";
  for (const auto& r : rows)
    os << r.model << ',' << r.report.name << ',' << format_double(r.report.mean) << ','
       << format_double(r.report.std_error) << ',' << r.report.n << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

void write_metrics_json(std::span<const MetricRow> rows, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows)
    j.push_back({{"model", r.model},
                 {"metric", r.report.name},
                 {"mean", r.report.mean},
                 {"std_error", r.report.std_error},
                 {"n", r.report.n}});
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "model,metric,mean,std_error,n") throw ConfigError(path.string() + ": not a metrics CSV");
  std::vector<MetricRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 5) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 5 columns");
    MetricRow r;
    r.model = cells[0];
    r.report.name = cells[1];
    try {
      r.report.mean = std::stod(cells[2]);
      r.report.std_error = std::stod(cells[3]);
      r.report.n = std::stoull(cells[4]);
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace gpvae
