#include "gpvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "gpvae/binary_io.hpp"
#include "gpvae/error.hpp"
#include "gpvae/structured_gaussian.hpp"

namespace gpvae {

namespace {

constexpr std::uint64_t kNoiseStream = 0x9e3779b97f4a7c15ULL;
constexpr std::string_view kImputationMagic = "GPVIMPUT";

ad::Tensor standard_normal(ad::Shape shape, std::mt19937_64& rng) {
  ad::Tensor t(std::move(shape));
  std::normal_distribution<double> nd(0.0, 1.0);
  for (double& v : t.data()) v = nd(rng);
  return t;
}

void check_batch(const TimeSeriesBatch& batch, const ModelParams& params) {
  batch.validate();
  if (batch.dim != params.encoder.input_dim || batch.dim != params.decoder.output_dim)
    throw ShapeError("batch has " + std::to_string(batch.dim) + " channels, model expects " +
                     std::to_string(params.encoder.input_dim));
  if (batch.n == 0) throw ShapeError("empty batch");
}

ad::Tensor batch_input(const TimeSeriesBatch& batch) {
  return ad::Tensor({batch.n, batch.steps, batch.dim}, batch.values);
}

// Posterior rows [n*k, T] -> decoder rows [n*T, k].
ad::Var time_major(ad::Var z, std::size_t n, std::size_t k, std::size_t T) {
  return ad::reshape(ad::swap_last_axes(ad::reshape(z, {n, k, T})), {n * T, k});
}

struct Adam {
  std::vector<ad::Tensor> m, v;
  std::size_t step = 0;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam decay rates must lie in [0, 1)");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  kernel.validate();
}

std::shared_ptr<const GramFactor> make_prior(const KernelSpec& kernel, std::span<const double> timestamps,
                                             const ModelOptions& options) {
  if (!options.gp_prior) return std::make_shared<const GramFactor>(identity_gram(timestamps));
  return std::make_shared<const GramFactor>(gram(kernel, timestamps));
}

ad::Var elbo_graph(ad::Tape& tape, const BoundParams& bound, const TimeSeriesBatch& batch,
                   std::shared_ptr<const GramFactor> prior, const ad::Tensor& noise, const ModelOptions& options,
                   ad::Var* reconstruction, ad::Var* kl) {
  const ModelParams& params = *bound.params;
  const std::size_t n = batch.n, T = batch.steps, d = batch.dim, k = params.latent_dim();
  if (prior->size() != T) throw ShapeError("elbo: prior length does not match the batch");

  const EncodedBatch enc = encode(bound, tape.constant(batch_input(batch)));
  const ad::Var z = band_sample(enc.mean, enc.diag, enc.off, tape.constant(noise));
  const ad::Var out = decode(bound, time_major(z, n, k, T));

  ad::Tensor target({n * T, d}, batch.values);
  ad::Tensor weight({n * T, d}, 1.0);
  double observed = static_cast<double>(weight.size());
  if (options.masked_elbo) {
    for (std::size_t i = 0; i < weight.size(); ++i) weight[i] = batch.mask[i] ? 0.0 : 1.0;
    observed = static_cast<double>(weight.size() - batch.missing_count());
  }
  const ad::Var x = tape.constant(std::move(target));
  const ad::Var w = tape.constant(std::move(weight));

  ad::Var loglik;
  if (params.decoder.likelihood == Likelihood::Gaussian) {
    const double s2 = params.likelihood_sigma2;
    const ad::Var sq = ad::sum(ad::mul(ad::square(ad::sub(x, out)), w));
    loglik = ad::add_scalar(ad::scale(sq, -0.5 / s2), -0.5 * observed * std::log(2.0 * std::numbers::pi * s2));
  } else {
    // x * l - softplus(l) = log Bernoulli(x | sigmoid(l))
    loglik = ad::sum(ad::mul(ad::sub(ad::mul(x, out), ad::softplus(out)), w));
  }
  const ad::Var divergence = band_kl(enc.mean, enc.diag, enc.off, std::move(prior));
  const double inv_n = 1.0 / static_cast<double>(n);
  if (reconstruction) *reconstruction = ad::scale(loglik, inv_n);
  if (kl) *kl = ad::scale(divergence, inv_n);
  return ad::scale(ad::sub(loglik, ad::scale(divergence, params.beta)), inv_n);
}

ElboResult elbo(const TimeSeriesBatch& batch, const ModelParams& params, const GramFactor& prior,
                std::mt19937_64& rng, const ModelOptions& options) {
  check_batch(batch, params);
  const ad::Tensor noise = standard_normal({batch.n * params.latent_dim(), batch.steps}, rng);
  ad::Tape tape;
  const BoundParams bound = bind(tape, params, true);
  ad::Var recon, kl;
  const ad::Var objective = elbo_graph(tape, bound, batch, std::make_shared<const GramFactor>(prior), noise,
                                       options, &recon, &kl);
  const ad::Gradients grads = tape.backward(objective);
  ElboResult r;
  r.objective = objective.value().item();
  r.reconstruction = recon.value().item();
  r.kl = kl.value().item();
  r.gradients.reserve(bound.vars.size());
  for (const ad::Var& v : bound.vars) r.gradients.push_back(grads.wrt(v));
  return r;
}

TrainResult train(const TimeSeriesBatch& data, const ModelParams& init, const TrainConfig& config) {
  config.validate();
  check_batch(data, init);
  TrainResult result;
  result.params = init;
  result.params.beta = config.beta;
  ModelParams& params = result.params;

  const auto prior = make_prior(config.kernel, data.timestamps, config.options);
  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 noise_rng(config.seed ^ kNoiseStream);

  Adam adam;
  for (const auto& t : params.tensors) {
    adam.m.push_back(ad::Tensor::zeros_like(t.value));
    adam.v.push_back(ad::Tensor::zeros_like(t.value));
  }

  std::vector<std::size_t> order(data.n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < data.n; start += config.batch_size) {
      const std::size_t stop = std::min(data.n, start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const TimeSeriesBatch mb = select(data, idx);

      const ModelParams last_good = params;
      ElboResult r;
      try {
        r = elbo(mb, params, *prior, noise_rng, config.options);
      } catch (const NumericError& e) {
        throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch + 1) + ": " +
                                   e.what(),
                               last_good, result.history);
      }
      epoch_sum += r.objective * static_cast<double>(mb.n);

      // Minimize -ELBO.
      double norm2 = 0.0;
      for (const auto& g : r.gradients)
        for (double v : g.data()) norm2 += v * v;
      const double norm = std::sqrt(norm2);
      const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;

      ++adam.step;
      const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.step));
      const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.step));
      for (std::size_t p = 0; p < params.tensors.size(); ++p) {
        auto w = params.tensors[p].value.data();
        auto m = adam.m[p].data();
        auto v = adam.v[p].data();
        const auto g = r.gradients[p].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double gi = -g[i] * clip;
          m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * gi;
          v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * gi * gi;
          w[i] -= config.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.adam_epsilon);
        }
      }
      if (!params.all_finite())
        throw TrainingDiverged("training diverged: non-finite parameters after update", last_good, result.history);
    }
    const double mean_objective = epoch_sum / static_cast<double>(data.n);
    if (!std::isfinite(mean_objective))
      throw TrainingDiverged("training diverged: non-finite epoch objective", params, result.history);
    result.history.push_back(mean_objective);
  }
  return result;
}

TrainResult train(const TimeSeriesBatch& data, const EncoderSpec& enc, const DecoderSpec& dec,
                  double likelihood_sigma2, const TrainConfig& config) {
  ModelParams init = init_params(enc, dec, config.seed);
  init.likelihood_sigma2 = likelihood_sigma2;
  return train(data, init, config);
}

namespace {

// Runs fn(chunk_batch, first_series) over chunks of at most 256 series.
template <class F>
void for_each_chunk(const TimeSeriesBatch& batch, F fn) {
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < batch.n; start += kChunk) {
    std::vector<std::size_t> idx(std::min(kChunk, batch.n - start));
    std::iota(idx.begin(), idx.end(), start);
    fn(select(batch, idx), start);
  }
}

ad::Var decoded_means(const BoundParams& bound, ad::Var z_rows) {
  ad::Var out = decode(bound, z_rows);
  if (bound.params->decoder.likelihood == Likelihood::Bernoulli) out = ad::sigmoid(out);
  return out;
}

}  // namespace

std::vector<double> reconstruct(const ModelParams& params, const TimeSeriesBatch& batch) {
  check_batch(batch, params);
  std::vector<double> out(batch.values.size());
  const std::size_t k = params.latent_dim(), T = batch.steps;
  for_each_chunk(batch, [&](const TimeSeriesBatch& chunk, std::size_t first) {
    ad::Tape tape;
    const BoundParams bound = bind(tape, params, false);
    const EncodedBatch enc = encode(bound, tape.constant(batch_input(chunk)));
    const ad::Var mean = decoded_means(bound, time_major(enc.mean, chunk.n, k, T));
    std::copy(mean.value().data().begin(), mean.value().data().end(),
              out.begin() + static_cast<std::ptrdiff_t>(first * batch.series_size()));
  });
  return out;
}

ImputationResult impute(const ModelParams& params, const TimeSeriesBatch& batch, std::size_t n_samples,
                        std::uint64_t seed) {
  if (n_samples == 0) throw ConfigError("impute: n_samples must be >= 1");
  check_batch(batch, params);
  ImputationResult r;
  r.n = batch.n;
  r.steps = batch.steps;
  r.dim = batch.dim;
  r.n_samples = n_samples;
  r.values = reconstruct(params, batch);
  r.std.assign(batch.values.size(), 0.0);

  const std::size_t k = params.latent_dim(), T = batch.steps;
  std::mt19937_64 rng(seed ^ kNoiseStream);
  if (n_samples > 1) {
    for_each_chunk(batch, [&](const TimeSeriesBatch& chunk, std::size_t first) {
      ad::Tape tape;
      const BoundParams bound = bind(tape, params, false);
      const EncodedBatch enc = encode(bound, tape.constant(batch_input(chunk)));
      const std::size_t size = chunk.values.size();
      std::vector<double> mean(size, 0.0), m2(size, 0.0);
      for (std::size_t s = 0; s < n_samples; ++s) {
        const ad::Var eps = tape.constant(standard_normal({chunk.n * k, T}, rng));
        const ad::Var z = band_sample(enc.mean, enc.diag, enc.off, eps);
        const auto& draw = decoded_means(bound, time_major(z, chunk.n, k, T)).value();
        for (std::size_t i = 0; i < size; ++i) {
          const double delta = draw[i] - mean[i];
          mean[i] += delta / static_cast<double>(s + 1);
          m2[i] += delta * (draw[i] - mean[i]);
        }
      }
      const std::size_t offset = first * batch.series_size();
      for (std::size_t i = 0; i < size; ++i) r.std[offset + i] = std::sqrt(m2[i] / static_cast<double>(n_samples - 1));
    });
  }
  for (std::size_t i = 0; i < r.values.size(); ++i)
    if (!batch.mask[i]) {
      r.values[i] = batch.values[i];
      r.std[i] = 0.0;
    }
  return r;
}

void save_imputation(const ImputationResult& r, const std::filesystem::path& path) {
  const std::size_t size = r.n * r.steps * r.dim;
  if (r.values.size() != size || r.std.size() != size) throw ShapeError("save_imputation: size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  io::write_magic(os, kImputationMagic);
  io::write<std::uint64_t>(os, r.n);
  io::write<std::uint64_t>(os, r.steps);
  io::write<std::uint64_t>(os, r.dim);
  io::write<std::uint64_t>(os, r.n_samples);
  io::write_doubles(os, r.values);
  io::write_doubles(os, r.std);
  if (!os) throw IoError("failed writing " + path.string());
}

ImputationResult load_imputation(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::expect_magic(is, kImputationMagic, "imputation");
  ImputationResult r;
  r.n = io::read<std::uint64_t>(is);
  r.steps = io::read<std::uint64_t>(is);
  r.dim = io::read<std::uint64_t>(is);
  r.n_samples = io::read<std::uint64_t>(is);
  r.values.resize(r.n * r.steps * r.dim);
  r.std.resize(r.values.size());
  io::read_doubles(is, r.values);
  io::read_doubles(is, r.std);
  return r;
}

double nll_from_predictions(std::span<const double> predictions, std::span<const double> truth,
                            std::span<const std::uint8_t> mask, Likelihood likelihood, double sigma2) {
  if (predictions.size() != truth.size() || mask.size() != truth.size())
    throw ShapeError("nll: predictions, truth and mask must have equal length");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    if (likelihood == Likelihood::Gaussian) {
      const double r = truth[i] - predictions[i];
      total += 0.5 * std::log(2.0 * std::numbers::pi * sigma2) + r * r / (2.0 * sigma2);
    } else {
      const double p = std::clamp(predictions[i], 1e-12, 1.0 - 1e-12);
      total -= truth[i] * std::log(p) + (1.0 - truth[i]) * std::log1p(-p);
    }
  }
  if (count == 0) throw DomainError("nll: no missing entries to score");
  return total / static_cast<double>(count);
}

double nll_missing(const ModelParams& params, const TimeSeriesBatch& batch, const GroundTruth& truth) {
  if (truth.values.size() != batch.values.size()) throw ShapeError("nll_missing: truth does not match batch");
  const auto pred = reconstruct(params, batch);
  return nll_from_predictions(pred, truth.values, batch.mask, params.decoder.likelihood, params.likelihood_sigma2);
}

}  // namespace gpvae
