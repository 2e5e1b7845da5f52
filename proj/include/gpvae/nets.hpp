#pragma once
// Inference network h_psi and generative network g_theta.
//
// Encoder, per series of T steps with d features (missing entries zero):
//   [optional dense preprocessor d -> P, ReLU]
//   conv_layers x (conv1d over time, `filters` channels, window filter_size, ReLU)
//   dense_layers x (dense, dense_width, ReLU)
//   linear -> 3k per step, split into k means, k raw band diagonals and k raw
//   band off-diagonals. Diagonals go through softplus; the off-diagonal row of
//   each latent dimension drops its last step (T-1 entries).
// Decoder, applied to every time step independently:
//   layers x (dense, width, ReLU), linear -> d.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gpvae/autodiff.hpp"
#include "gpvae/structured_gaussian.hpp"

namespace gpvae {

enum class Likelihood { Gaussian, Bernoulli };

std::string_view likelihood_name(Likelihood l);
Likelihood parse_likelihood(std::string_view name);

struct EncoderSpec {
  std::size_t input_dim = 1;
  /// Width of the per-frame dense preprocessor; 0 disables it.
  std::size_t preprocess_width = 0;
  std::size_t conv_layers = 1;
  std::size_t filters = 256;
  std::size_t filter_size = 3;
  std::size_t dense_layers = 2;
  std::size_t dense_width = 256;
  std::size_t latent_dim = 256;
  /// false: band off-diagonals fixed at zero (factorized posterior).
  bool structured = true;

  void validate() const;
};

struct DecoderSpec {
  std::size_t layers = 3;
  std::size_t width = 256;
  std::size_t output_dim = 1;
  Likelihood likelihood = Likelihood::Gaussian;

  void validate() const;
};

struct NamedTensor {
  std::string name;
  ad::Tensor value;
};

struct ModelParams {
  EncoderSpec encoder;
  DecoderSpec decoder;
  double likelihood_sigma2 = 0.05;
  double beta = 0.8;
  std::vector<NamedTensor> tensors;

  std::size_t latent_dim() const { return encoder.latent_dim; }
  std::size_t parameter_count() const;
  const ad::Tensor& get(std::string_view name) const;
  ad::Tensor& get(std::string_view name);
  bool all_finite() const;
};

/// Deterministic given seed. Weights ~ U(-a, a) with a = sqrt(6 / fan_in)
/// for ReLU layers and sqrt(3 / fan_in) for linear heads (the encoder head
/// further scaled by 0.1); biases zero except the raw band-diagonal biases,
/// set to softplus^{-1}(1).
ModelParams init_params(const EncoderSpec& enc, const DecoderSpec& dec, std::uint64_t seed);

/// Parameters bound to a tape, in ModelParams::tensors order.
struct BoundParams {
  std::vector<ad::Var> vars;
  const ModelParams* params = nullptr;

  ad::Var operator[](std::string_view name) const;
};

/// Leaves (trainable) or constants.
BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable);

/// Posterior parameters for n series, rows ordered (series, latent dim).
struct EncodedBatch {
  ad::Var mean;  // [n*k, T]
  ad::Var diag;  // [n*k, T]
  ad::Var off;   // [n*k, T-1]
  std::size_t series = 0, steps = 0, latent = 0;
};

/// x: [n, T, d] with missing entries zero.
EncodedBatch encode(const BoundParams& p, ad::Var x);
/// z: [n*T, k] -> [n*T, d]: Gaussian means, or Bernoulli logits.
ad::Var decode(const BoundParams& p, ad::Var z);

/// Single-series convenience wrappers.
/// x_filled and mask are T x d row-major; mask true = missing.
StructuredPosterior encode(const ModelParams& params, std::span<const double> x_filled,
                           std::span<const std::uint8_t> mask, std::size_t steps);
/// z: T x k row-major -> T x d row-major means (Gaussian) or probabilities
/// (Bernoulli).
std::vector<double> decode(const ModelParams& params, std::span<const double> z, std::size_t steps);

/// Versioned little-endian checkpoint; layout in docs/formats.md.
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace gpvae
