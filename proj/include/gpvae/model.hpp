#pragma once
// GP-VAE assembly: the masked beta-ELBO, Adam training, imputation and the
// held-out likelihood metric.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include "gpvae/data.hpp"
#include "gpvae/error.hpp"
#include "gpvae/kernels.hpp"
#include "gpvae/nets.hpp"

namespace gpvae {

/// Switches that realize the baseline family on top of one code path.
struct ModelOptions {
  /// false: standard-normal prior over every latent step (no temporal GP).
  bool gp_prior = true;
  /// false: likelihood summed over every entry, zero-filled ones included.
  bool masked_elbo = true;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double beta = 0.8;
  std::uint64_t seed = 0;
  KernelSpec kernel = KernelSpec::cauchy(1.0, 2.0);
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Gradients are rescaled to this global norm when they exceed it.
  double clip_norm = 1e4;
  ModelOptions options;

  void validate() const;
};

struct ElboResult {
  /// Mean over series of (reconstruction - beta * KL).
  double objective = 0.0;
  /// Mean over series of the summed observed log-likelihood.
  double reconstruction = 0.0;
  /// Mean over series of the KL summed over latent dimensions.
  double kl = 0.0;
  /// d objective / d parameter, in ModelParams::tensors order.
  std::vector<ad::Tensor> gradients;
};

/// Prior over the batch grid for the given options.
std::shared_ptr<const GramFactor> make_prior(const KernelSpec& kernel, std::span<const double> timestamps,
                                             const ModelOptions& options);

/// One reparameterized sample per series, drawn from `rng`.
ElboResult elbo(const TimeSeriesBatch& batch, const ModelParams& params, const GramFactor& prior,
                std::mt19937_64& rng, const ModelOptions& options = {});

/// Records the objective on `tape` with the given reparameterization noise
/// ([n*k, T]); exposed for gradient checking.
ad::Var elbo_graph(ad::Tape& tape, const BoundParams& bound, const TimeSeriesBatch& batch,
                   std::shared_ptr<const GramFactor> prior, const ad::Tensor& noise, const ModelOptions& options,
                   ad::Var* reconstruction = nullptr, ad::Var* kl = nullptr);

struct TrainResult {
  ModelParams params;
  /// Mean training objective per series, one entry per epoch.
  std::vector<double> history;
};

/// Raised when the objective turns non-finite; carries the last parameters
/// that produced a finite objective.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, ModelParams last_good, std::vector<double> history)
      : NumericError(what), last_good_(std::move(last_good)), history_(std::move(history)) {}
  const ModelParams& last_good() const { return last_good_; }
  const std::vector<double>& history() const { return history_; }

 private:
  ModelParams last_good_;
  std::vector<double> history_;
};

/// Adam on -ELBO. Deterministic given config.seed.
TrainResult train(const TimeSeriesBatch& data, const ModelParams& init, const TrainConfig& config);
TrainResult train(const TimeSeriesBatch& data, const EncoderSpec& enc, const DecoderSpec& dec,
                  double likelihood_sigma2, const TrainConfig& config);

struct ImputationResult {
  std::size_t n = 0, steps = 0, dim = 0;
  /// Decoded posterior mean; observed entries copied from the input.
  std::vector<double> values;
  /// Spread of decoded posterior samples; 0 at observed entries and when
  /// n_samples == 1.
  std::vector<double> std;
  std::size_t n_samples = 0;
};

/// Little-endian container "GPVIMPUT"; layout in docs/formats.md.
void save_imputation(const ImputationResult& r, const std::filesystem::path& path);
ImputationResult load_imputation(const std::filesystem::path& path);

ImputationResult impute(const ModelParams& params, const TimeSeriesBatch& batch, std::size_t n_samples,
                        std::uint64_t seed = 0);

/// Decoder output (means or probabilities) at the posterior-mean latent path,
/// n*T*d, without copy-through.
std::vector<double> reconstruct(const ModelParams& params, const TimeSeriesBatch& batch);

/// Mean per-entry negative log-likelihood of `truth` at the missing entries
/// of `batch`, given decoder predictions (means or probabilities).
double nll_from_predictions(std::span<const double> predictions, std::span<const double> truth,
                            std::span<const std::uint8_t> mask, Likelihood likelihood, double sigma2);

/// nll_from_predictions at the posterior-mean reconstruction.
double nll_missing(const ModelParams& params, const TimeSeriesBatch& batch, const GroundTruth& truth);

}  // namespace gpvae
