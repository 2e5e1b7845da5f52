#include "gpvae/nets.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "gpvae/binary_io.hpp"
#include "gpvae/error.hpp"

namespace gpvae {

namespace {

constexpr std::string_view kCheckpointMagic = "GPVAECKP";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kDiagFloor = 1e-6;

std::string layer(std::string_view prefix, std::size_t i, std::string_view suffix) {
  return std::string(prefix) + std::to_string(i) + std::string(suffix);
}

}  // namespace

std::string_view likelihood_name(Likelihood l) { return l == Likelihood::Gaussian ? "gaussian" : "bernoulli"; }

Likelihood parse_likelihood(std::string_view name) {
  if (name == "gaussian") return Likelihood::Gaussian;
  if (name == "bernoulli") return Likelihood::Bernoulli;
  throw ConfigError("unknown likelihood '" + std::string(name) + "'");
}

void EncoderSpec::validate() const {
  if (input_dim == 0) throw ConfigError("encoder: input_dim must be >= 1");
  if (latent_dim == 0) throw ConfigError("encoder: latent_dim must be >= 1");
  if (conv_layers > 0 && (filters == 0 || filter_size == 0))
    throw ConfigError("encoder: conv layers need filters >= 1 and filter_size >= 1");
  if (dense_layers > 0 && dense_width == 0) throw ConfigError("encoder: dense_width must be >= 1");
}

void DecoderSpec::validate() const {
  if (output_dim == 0) throw ConfigError("decoder: output_dim must be >= 1");
  if (layers > 0 && width == 0) throw ConfigError("decoder: width must be >= 1");
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.value.size();
  return n;
}

const ad::Tensor& ModelParams::get(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw Error("no parameter named '" + std::string(name) + "'");
}

ad::Tensor& ModelParams::get(std::string_view name) {
  return const_cast<ad::Tensor&>(std::as_const(*this).get(name));
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors)
    if (!t.value.all_finite()) return false;
  return true;
}

ModelParams init_params(const EncoderSpec& enc, const DecoderSpec& dec, std::uint64_t seed) {
  enc.validate();
  dec.validate();
  ModelParams p;
  p.encoder = enc;
  p.decoder = dec;
  std::mt19937_64 rng(seed);

  auto weight = [&](std::string name, ad::Shape shape, std::size_t fan_in, double limit) {
    ad::Tensor w(std::move(shape));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : w.data()) v = u(rng);
    p.tensors.push_back({std::move(name), std::move(w)});
    (void)fan_in;
  };
  auto bias = [&](std::string name, std::size_t n) { p.tensors.push_back({std::move(name), ad::Tensor({n})}); };
  auto relu_limit = [](std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); };
  auto linear_limit = [](std::size_t fan_in) { return std::sqrt(3.0 / static_cast<double>(fan_in)); };

  std::size_t width = enc.input_dim;
  if (enc.preprocess_width > 0) {
    weight("enc.pre.w", {width, enc.preprocess_width}, width, relu_limit(width));
    bias("enc.pre.b", enc.preprocess_width);
    width = enc.preprocess_width;
  }
  for (std::size_t i = 0; i < enc.conv_layers; ++i) {
    const std::size_t fan_in = enc.filter_size * width;
    weight(layer("enc.conv", i, ".w"), {enc.filter_size, width, enc.filters}, fan_in, relu_limit(fan_in));
    bias(layer("enc.conv", i, ".b"), enc.filters);
    width = enc.filters;
  }
  for (std::size_t i = 0; i < enc.dense_layers; ++i) {
    weight(layer("enc.dense", i, ".w"), {width, enc.dense_width}, width, relu_limit(width));
    bias(layer("enc.dense", i, ".b"), enc.dense_width);
    width = enc.dense_width;
  }
  const std::size_t k = enc.latent_dim;
  weight("enc.out.w", {width, 3 * k}, width, 0.1 * linear_limit(width));
  bias("enc.out.b", 3 * k);
  // softplus(log(e - 1)) = 1
  auto& out_b = p.tensors.back().value;
  for (std::size_t j = k; j < 2 * k; ++j) out_b[j] = std::log(std::exp(1.0) - 1.0);

  width = k;
  for (std::size_t i = 0; i < dec.layers; ++i) {
    weight(layer("dec.hidden", i, ".w"), {width, dec.width}, width, relu_limit(width));
    bias(layer("dec.hidden", i, ".b"), dec.width);
    width = dec.width;
  }
  weight("dec.out.w", {width, dec.output_dim}, width, linear_limit(width));
  bias("dec.out.b", dec.output_dim);
  return p;
}

ad::Var BoundParams::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < params->tensors.size(); ++i)
    if (params->tensors[i].name == name) return vars[i];
  throw Error("no parameter named '" + std::string(name) + "'");
}

BoundParams bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  BoundParams b;
  b.params = &params;
  b.vars.reserve(params.tensors.size());
  for (const auto& t : params.tensors) b.vars.push_back(trainable ? tape.leaf(t.value) : tape.constant(t.value));
  return b;
}

EncodedBatch encode(const BoundParams& p, ad::Var x) {
  const EncoderSpec& enc = p.params->encoder;
  const ad::Shape& s = x.shape();
  if (s.size() != 3 || s[2] != enc.input_dim)
    throw ShapeError("encode: expected [n, T, " + std::to_string(enc.input_dim) + "], got " + ad::shape_str(s));
  const std::size_t n = s[0], T = s[1], k = enc.latent_dim;
  if (T == 0) throw ShapeError("encode: empty series");

  ad::Var h = ad::reshape(x, {n * T, enc.input_dim});
  std::size_t width = enc.input_dim;
  if (enc.preprocess_width > 0) {
    h = ad::relu(ad::add_bias(ad::matmul(h, p["enc.pre.w"]), p["enc.pre.b"]));
    width = enc.preprocess_width;
  }
  for (std::size_t i = 0; i < enc.conv_layers; ++i) {
    ad::Var c = ad::conv1d_same(ad::reshape(h, {n, T, width}), p[layer("enc.conv", i, ".w")]);
    width = enc.filters;
    h = ad::relu(ad::add_bias(ad::reshape(c, {n * T, width}), p[layer("enc.conv", i, ".b")]));
  }
  for (std::size_t i = 0; i < enc.dense_layers; ++i)
    h = ad::relu(ad::add_bias(ad::matmul(h, p[layer("enc.dense", i, ".w")]), p[layer("enc.dense", i, ".b")]));
  const ad::Var out = ad::add_bias(ad::matmul(h, p["enc.out.w"]), p["enc.out.b"]);

  // [n*T, k] -> [n, k, T] -> [n*k, T]
  auto latent_major = [&](ad::Var block) {
    return ad::reshape(ad::swap_last_axes(ad::reshape(block, {n, T, k})), {n * k, T});
  };
  EncodedBatch e;
  e.series = n;
  e.steps = T;
  e.latent = k;
  e.mean = latent_major(ad::slice_cols(out, 0, k));
  e.diag = ad::add_scalar(ad::softplus(latent_major(ad::slice_cols(out, k, 2 * k))), kDiagFloor);
  if (enc.structured) {
    e.off = ad::slice_cols(latent_major(ad::slice_cols(out, 2 * k, 3 * k)), 0, T - 1);
  } else {
    e.off = x.tape()->constant(ad::Tensor({n * k, T - 1}));
  }
  return e;
}

ad::Var decode(const BoundParams& p, ad::Var z) {
  const DecoderSpec& dec = p.params->decoder;
  const std::size_t k = p.params->encoder.latent_dim;
  if (z.shape().size() != 2 || z.shape()[1] != k)
    throw ShapeError("decode: expected [rows, " + std::to_string(k) + "], got " + ad::shape_str(z.shape()));
  ad::Var h = z;
  for (std::size_t i = 0; i < dec.layers; ++i)
    h = ad::relu(ad::add_bias(ad::matmul(h, p[layer("dec.hidden", i, ".w")]), p[layer("dec.hidden", i, ".b")]));
  return ad::add_bias(ad::matmul(h, p["dec.out.w"]), p["dec.out.b"]);
}

StructuredPosterior encode(const ModelParams& params, std::span<const double> x_filled,
                           std::span<const std::uint8_t> mask, std::size_t steps) {
  const std::size_t d = params.encoder.input_dim;
  if (x_filled.size() != steps * d || mask.size() != steps * d)
    throw ShapeError("encode: expected " + std::to_string(steps) + " x " + std::to_string(d) + " input and mask");
  for (std::size_t i = 0; i < x_filled.size(); ++i)
    if (mask[i] && x_filled[i] != 0.0) throw DomainError("encode: missing entries must be zero-filled");

  ad::Tape tape;
  const BoundParams p = bind(tape, params, false);
  const ad::Var x = tape.constant(ad::Tensor({1, steps, d}, std::vector<double>(x_filled.begin(), x_filled.end())));
  const EncodedBatch e = encode(p, x);

  const std::size_t k = e.latent, T = e.steps;
  StructuredPosterior post;
  post.means = Eigen::Map<const RowMatrix>(e.mean.value().data().data(), static_cast<Eigen::Index>(k),
                                           static_cast<Eigen::Index>(T));
  post.band_diag = Eigen::Map<const RowMatrix>(e.diag.value().data().data(), static_cast<Eigen::Index>(k),
                                               static_cast<Eigen::Index>(T));
  post.band_off = Eigen::Map<const RowMatrix>(e.off.value().data().data(), static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(T - 1));
  return post;
}

std::vector<double> decode(const ModelParams& params, std::span<const double> z, std::size_t steps) {
  const std::size_t k = params.encoder.latent_dim;
  if (z.size() != steps * k) throw ShapeError("decode: expected " + std::to_string(steps) + " x " + std::to_string(k));
  ad::Tape tape;
  const BoundParams p = bind(tape, params, false);
  ad::Var out = decode(p, tape.constant(ad::Tensor({steps, k}, std::vector<double>(z.begin(), z.end()))));
  if (params.decoder.likelihood == Likelihood::Bernoulli) out = ad::sigmoid(out);
  return out.value().storage();
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  io::write_magic(os, kCheckpointMagic);
  io::write<std::uint32_t>(os, kCheckpointVersion);
  const EncoderSpec& e = params.encoder;
  for (std::uint64_t v : {e.input_dim, e.preprocess_width, e.conv_layers, e.filters, e.filter_size, e.dense_layers,
                          e.dense_width, e.latent_dim})
    io::write<std::uint64_t>(os, v);
  io::write<std::uint8_t>(os, e.structured ? 1 : 0);
  const DecoderSpec& d = params.decoder;
  for (std::uint64_t v : {d.layers, d.width, d.output_dim}) io::write<std::uint64_t>(os, v);
  io::write<std::uint8_t>(os, d.likelihood == Likelihood::Bernoulli ? 1 : 0);
  io::write<double>(os, params.likelihood_sigma2);
  io::write<double>(os, params.beta);
  io::write<std::uint64_t>(os, params.tensors.size());
  for (const auto& t : params.tensors) {
    io::write<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    io::write<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t dim : t.value.shape()) io::write<std::uint64_t>(os, dim);
    io::write_doubles(os, t.value.data());
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  io::expect_magic(is, kCheckpointMagic, "checkpoint");
  const auto version = io::read<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  ModelParams p;
  EncoderSpec& e = p.encoder;
  for (std::size_t* f : {&e.input_dim, &e.preprocess_width, &e.conv_layers, &e.filters, &e.filter_size,
                         &e.dense_layers, &e.dense_width, &e.latent_dim})
    *f = io::read<std::uint64_t>(is);
  e.structured = io::read<std::uint8_t>(is) != 0;
  DecoderSpec& d = p.decoder;
  for (std::size_t* f : {&d.layers, &d.width, &d.output_dim}) *f = io::read<std::uint64_t>(is);
  d.likelihood = io::read<std::uint8_t>(is) ? Likelihood::Bernoulli : Likelihood::Gaussian;
  p.likelihood_sigma2 = io::read<double>(is);
  p.beta = io::read<double>(is);
  const auto count = io::read<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name.resize(io::read<std::uint32_t>(is));
    is.read(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    ad::Shape shape(io::read<std::uint32_t>(is));
    for (auto& dim : shape) dim = io::read<std::uint64_t>(is);
    t.value = ad::Tensor(shape);
    io::read_doubles(is, t.value.data());
    p.tensors.push_back(std::move(t));
  }
  e.validate();
  d.validate();
  // Structural check against a fresh layout.
  const ModelParams layout = init_params(e, d, 0);
  if (layout.tensors.size() != p.tensors.size()) throw IoError("checkpoint tensor count does not match its specs");
  for (std::size_t i = 0; i < p.tensors.size(); ++i)
    if (layout.tensors[i].name != p.tensors[i].name || layout.tensors[i].value.shape() != p.tensors[i].value.shape())
      throw IoError("checkpoint tensor '" + p.tensors[i].name + "' does not match its specs");
  return p;
}

}  // namespace gpvae
