#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "gpvae/baselines.hpp"
#include "gpvae/data.hpp"
#include "gpvae/error.hpp"
#include "gpvae/eval.hpp"
#include "gpvae/missingness.hpp"
#include "gpvae/model.hpp"
#include "gpvae/simd.hpp"

namespace gpvae::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kSplitNames[] = {"train", "val", "test"};

std::string default_output_dir() {
  const char* env = std::getenv("GPVAE_OUTPUT_DIR");
  return env && *env ? env : "gpvae-run";
}

struct DataConfig {
  std::string source = "synthetic";
  std::string csv;
  std::string id_column = "id";
  std::string time_column = "time";
  std::string label_column;
  std::vector<std::string> channels;
  double bin_width = 0.0;
  std::size_t n = 500;
  std::size_t steps = 10;
  std::size_t grid = 8;
  double rotation_std = 0.5;
  std::size_t labels = 10;
  std::string mask = "mcar";
  double rate = 0.6;
  double mask_lengthscale = 2.0;
  double dpp_strength = 1.0;
  double mnar_ratio = 2.0;
  std::string mnar_split = "median";
  std::vector<double> split = {0.8, 0.0, 0.2};
  bool normalize = false;
};

struct ModelConfig {
  std::string model = "gpvae";
  std::string name;
  std::size_t latent_dim = 256;
  std::size_t preprocess_width = 0;
  std::size_t conv_layers = 1;
  std::size_t filters = 256;
  std::size_t filter_size = 3;
  std::size_t dense_layers = 2;
  std::size_t dense_width = 256;
  std::size_t decoder_layers = 3;
  std::size_t decoder_width = 256;
  std::string likelihood = "gaussian";
  double sigma2 = 0.05;
  std::size_t epochs = 20;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  double beta = 0.8;
  std::string kernel = "cauchy";
  double kernel_sigma2 = 1.0;
  double kernel_lengthscale = 2.0;
  double kernel_alpha = 1.0;
  bool no_gp_prior = false;
  bool full_elbo = false;
  bool no_structured = false;
};

struct ImputeConfig {
  std::string model = "gpvae";
  std::size_t samples = 10;
  double gp_noise = 1e-2;
  double gp_sigma2 = 1.0;
};

struct EvalConfig {
  std::string model = "gpvae";
  double l2 = 1e-3;
  std::size_t iterations = 300;
  double classifier_lr = 0.5;
};

struct ReportConfig {
  std::string plot_model;
  std::string plot_split = "test";
  std::size_t series = 0;
};

struct RunConfig {
  std::string out = default_output_dir();
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model;
  ImputeConfig impute;
  EvalConfig eval;
  ReportConfig report;
  std::vector<std::string> models = {"gpvae", "hivae", "vae", "mean", "forward", "gp"};
};

bool is_vae(const std::string& model) { return model == "gpvae" || model == "hivae" || model == "vae"; }
bool is_baseline(const std::string& model) { return model == "mean" || model == "forward" || model == "gp"; }

fs::path data_path(const fs::path& run, std::string_view split, bool truth = false) {
  return run / "data" / (std::string(split) + (truth ? "_truth.bin" : ".bin"));
}
fs::path checkpoint_path(const fs::path& run, const std::string& name) { return run / "models" / (name + ".ckpt"); }
fs::path imputed_path(const fs::path& run, const std::string& name, std::string_view split) {
  return run / "imputed" / (name + "_" + std::string(split) + ".bin");
}
fs::path metrics_path(const fs::path& run, const std::string& name, std::string_view ext) {
  return run / "metrics" / (name + std::string(ext));
}

void require_file(const fs::path& p, std::string_view hint) {
  if (!fs::exists(p)) throw ConfigError(p.string() + " does not exist (" + std::string(hint) + ")");
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  os << text;
}

// ---------------------------------------------------------------------------
// Options

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--out", c.out, "Run directory (default: $GPVAE_OUTPUT_DIR or ./gpvae-run)")->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for every random choice")->capture_default_str();
}

void add_data_options(CLI::App* sub, DataConfig& d) {
  sub->add_option("--source", d.source, "synthetic | csv")
      ->check(CLI::IsMember({"synthetic", "csv"}))
      ->capture_default_str();
  sub->add_option("--csv", d.csv, "Input CSV (wide: id, time, one column per channel)");
  sub->add_option("--id-column", d.id_column)->capture_default_str();
  sub->add_option("--time-column", d.time_column)->capture_default_str();
  sub->add_option("--label-column", d.label_column);
  sub->add_option("--channels", d.channels, "Channel columns (default: all others)")->delimiter(',');
  sub->add_option("--bin-width", d.bin_width, "Time bin width; 0 keeps exact times")->capture_default_str();
  sub->add_option("--n", d.n, "Synthetic series count")->capture_default_str();
  sub->add_option("--steps", d.steps, "Synthetic series length")->capture_default_str();
  sub->add_option("--grid", d.grid, "Synthetic frame side (channels = grid^2)")->capture_default_str();
  sub->add_option("--rotation-std", d.rotation_std, "Per-step rotation std (rad)")->capture_default_str();
  sub->add_option("--labels", d.labels, "Synthetic glyph classes")->capture_default_str();
  sub->add_option("--mask", d.mask, "mcar | spatial | temporal_pos | temporal_neg | mnar")
      ->check(CLI::IsMember({"mcar", "spatial", "temporal_pos", "temporal_neg", "mnar"}))
      ->capture_default_str();
  sub->add_option("--rate", d.rate, "Target missing rate")->capture_default_str();
  sub->add_option("--mask-lengthscale", d.mask_lengthscale)->capture_default_str();
  sub->add_option("--dpp-strength", d.dpp_strength)->capture_default_str();
  sub->add_option("--mnar-ratio", d.mnar_ratio)->capture_default_str();
  sub->add_option("--mnar-split", d.mnar_split, "'median' or a numeric threshold")->capture_default_str();
  sub->add_option("--split", d.split, "train,val,test fractions")->delimiter(',')->expected(3)->capture_default_str();
  sub->add_flag("--normalize", d.normalize, "Standardize channels with training-split statistics");
}

void add_model_options(CLI::App* sub, ModelConfig& m, bool with_model_choice) {
  if (with_model_choice)
    sub->add_option("--model", m.model, "gpvae | hivae | vae (hivae/vae: standard-normal prior, per-step factorized encoder)")
        ->check(CLI::IsMember({"gpvae", "hivae", "vae"}))
        ->capture_default_str();
  sub->add_option("--name", m.name, "Name of the trained model (default: --model)");
  sub->add_option("--latent-dim", m.latent_dim)->capture_default_str();
  sub->add_option("--preprocess-width", m.preprocess_width, "Per-frame dense preprocessor; 0 = none")
      ->capture_default_str();
  sub->add_option("--conv-layers", m.conv_layers)->capture_default_str();
  sub->add_option("--filters", m.filters)->capture_default_str();
  sub->add_option("--filter-size", m.filter_size)->capture_default_str();
  sub->add_option("--dense-layers", m.dense_layers)->capture_default_str();
  sub->add_option("--dense-width", m.dense_width)->capture_default_str();
  sub->add_option("--decoder-layers", m.decoder_layers)->capture_default_str();
  sub->add_option("--decoder-width", m.decoder_width)->capture_default_str();
  sub->add_option("--likelihood", m.likelihood, "gaussian | bernoulli")
      ->check(CLI::IsMember({"gaussian", "bernoulli"}))
      ->capture_default_str();
  sub->add_option("--sigma2", m.sigma2, "Gaussian likelihood variance")->capture_default_str();
  sub->add_option("--epochs", m.epochs)->capture_default_str();
  sub->add_option("--lr", m.lr)->capture_default_str();
  sub->add_option("--batch-size", m.batch_size)->capture_default_str();
  sub->add_option("--beta", m.beta)->capture_default_str();
  sub->add_option("--kernel", m.kernel, "cauchy | rbf | rq")
      ->check(CLI::IsMember({"cauchy", "rbf", "rq"}))
      ->capture_default_str();
  sub->add_option("--kernel-sigma2", m.kernel_sigma2)->capture_default_str();
  sub->add_option("--kernel-lengthscale", m.kernel_lengthscale)->capture_default_str();
  sub->add_option("--kernel-alpha", m.kernel_alpha)->capture_default_str();
  sub->add_flag("--no-gp-prior", m.no_gp_prior, "Standard-normal latent prior");
  sub->add_flag("--full-elbo", m.full_elbo, "Likelihood over every entry, zero-filled ones included");
  sub->add_flag("--no-structured", m.no_structured, "Factorized posterior (no band off-diagonals)");
}

void add_impute_options(CLI::App* sub, ImputeConfig& c, bool with_model_choice) {
  if (with_model_choice)
    sub->add_option("--model", c.model, "Trained model name, or mean | forward | gp")->capture_default_str();
  sub->add_option("--samples", c.samples, "Posterior samples for the std estimate")->capture_default_str();
  sub->add_option("--gp-noise", c.gp_noise, "GP baseline noise variance")->capture_default_str();
  sub->add_option("--gp-sigma2", c.gp_sigma2, "GP baseline kernel variance")->capture_default_str();
}

void add_eval_options(CLI::App* sub, EvalConfig& c, bool with_model_choice) {
  if (with_model_choice) sub->add_option("--model", c.model, "Model name")->capture_default_str();
  sub->add_option("--l2", c.l2, "Classifier L2 penalty")->capture_default_str();
  sub->add_option("--classifier-iters", c.iterations)->capture_default_str();
  sub->add_option("--classifier-lr", c.classifier_lr)->capture_default_str();
}

void add_report_options(CLI::App* sub, ReportConfig& c) {
  sub->add_option("--plot-model", c.plot_model, "Model for the curve CSV (default: first with results)");
  sub->add_option("--plot-split", c.plot_split)->capture_default_str();
  sub->add_option("--series", c.series, "Series index for the curve CSV")->capture_default_str();
}

// ---------------------------------------------------------------------------
// Manifest

void write_manifest(const fs::path& run, const std::string& command, const CLI::App& app,
                    const std::vector<std::string>& args, std::uint64_t seed) {
  fs::create_directories(run);
  // Only this command's "command.option=value" lines.
  std::istringstream all(app.config_to_str(true, false));
  std::string ini, line;
  while (std::getline(all, line))
    if (line.rfind(command + ".", 0) == 0) ini += line + "\n";
  write_text(run / ("manifest_" + command + ".ini"), ini);
  json j;
  j["tool"] = "gpvae";
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = seed;
  j["args"] = args;
  j["simd"] = std::string(simd::isa_name(simd::active_isa()));
  j["replay"] = "gpvae " + command + " --config manifest_" + command + ".ini";
  j["config"] = ini;
  write_text(run / ("manifest_" + command + ".json"), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Commands

void cmd_generate(const RunConfig& c, std::ostream& out) {
  const fs::path run = c.out;
  const DataConfig& d = c.data;
  TimeSeriesBatch known;  // entries with a known value; mask = naturally missing
  std::vector<std::string> warnings;
  if (d.source == "csv") {
    if (d.csv.empty()) throw ConfigError("--source csv needs --csv PATH");
    CsvSchema schema;
    schema.id_column = d.id_column;
    schema.time_column = d.time_column;
    schema.label_column = d.label_column;
    // a replayed manifest spells "no channels" as one empty entry
    for (const auto& ch : d.channels)
      if (!ch.empty()) schema.channels.push_back(ch);
    schema.bin_width = d.bin_width;
    CsvLoadResult loaded = load_csv(d.csv, schema);
    known = std::move(loaded.batch);
    warnings = std::move(loaded.warnings);
  } else {
    RotatingPatternsConfig g;
    g.n = d.n;
    g.steps = d.steps;
    g.grid_size = d.grid;
    g.rotation_std = d.rotation_std;
    g.label_count = d.labels;
    g.seed = c.seed;
    known = observe_all(generate_rotating_patterns(g));
  }

  MaskSpec spec;
  spec.mechanism = parse_mechanism(d.mask);
  spec.target_rate = d.rate;
  spec.lengthscale = d.mask_lengthscale;
  spec.dpp_strength = d.dpp_strength;
  spec.mnar_ratio = d.mnar_ratio;
  if (d.mnar_split != "median") {
    try {
      spec.mnar_threshold = std::stod(d.mnar_split);
    } catch (const std::exception&) {
      throw ConfigError("--mnar-split must be 'median' or a number");
    }
  }
  spec.seed = c.seed ^ 0x5851f42d4c957f2dULL;
  GroundTruth truth;
  truth.n = known.n;
  truth.steps = known.steps;
  truth.dim = known.dim;
  truth.values = known.values;
  truth.timestamps = known.timestamps;
  truth.labels = known.labels;
  const std::vector<std::uint8_t> artificial = generate_mask(spec, truth, &warnings);
  std::vector<std::uint8_t> combined(artificial.size());
  for (std::size_t i = 0; i < combined.size(); ++i) combined[i] = artificial[i] | known.mask[i];
  TimeSeriesBatch observed = apply_mask(truth, combined);

  if (d.split.size() != 3) throw ConfigError("--split needs three fractions");
  const SplitIndices idx =
      split_indices(observed.n, observed.labels, {d.split[0], d.split[1], d.split[2]}, c.seed ^ 0x2545f4914f6cdd1dULL);
  const std::vector<std::size_t>* parts[] = {&idx.train, &idx.val, &idx.test};

  std::optional<NormStats> stats;
  fs::create_directories(run / "data");
  for (int s = 0; s < 3; ++s) {
    fs::remove(data_path(run, kSplitNames[s]));
    fs::remove(data_path(run, kSplitNames[s], true));
  }
  for (int s = 0; s < 3; ++s) {
    if (parts[s]->empty()) continue;
    TimeSeriesBatch obs = select(observed, *parts[s]);
    TimeSeriesBatch ref = select(known, *parts[s]);
    if (d.normalize) {
      if (!stats) stats = normalize(obs).second;
      obs = normalize(obs, stats).first;
      ref = normalize(ref, stats).first;
    }
    save_batch(obs, data_path(run, kSplitNames[s]));
    save_batch(ref, data_path(run, kSplitNames[s], true));
    out << kSplitNames[s] << ": " << obs.n << " series, " << obs.steps << " steps, " << obs.dim
        << " channels, missing rate " << format_double(obs.missing_rate()) << "\n";
  }
  if (stats) {
    json j;
    j["mean"] = stats->mean;
    j["std"] = stats->std;
    write_text(run / "data" / "norm.json", j.dump(2) + "\n");
  }
  save_mask(MaskSet{observed.n, observed.steps, observed.dim, artificial}, run / "data" / "mask.bin");
  for (const auto& w : warnings) out << "warning: " << w << "\n";
}

struct ResolvedModel {
  EncoderSpec enc;
  DecoderSpec dec;
  TrainConfig train;
};

ResolvedModel resolve_model(const ModelConfig& m, std::size_t dim, std::uint64_t seed) {
  ResolvedModel r;
  r.enc.input_dim = dim;
  r.enc.preprocess_width = m.preprocess_width;
  r.enc.conv_layers = m.conv_layers;
  r.enc.filters = m.filters;
  r.enc.filter_size = m.filter_size;
  r.enc.dense_layers = m.dense_layers;
  r.enc.dense_width = m.dense_width;
  r.enc.latent_dim = m.latent_dim;
  r.enc.structured = !m.no_structured;
  r.dec.layers = m.decoder_layers;
  r.dec.width = m.decoder_width;
  r.dec.output_dim = dim;
  r.dec.likelihood = parse_likelihood(m.likelihood);

  TrainConfig& t = r.train;
  t.learning_rate = m.lr;
  t.epochs = m.epochs;
  t.batch_size = m.batch_size;
  t.beta = m.beta;
  t.seed = seed;
  switch (parse_kernel_family(m.kernel)) {
    case KernelFamily::Cauchy:
      t.kernel = KernelSpec::cauchy(m.kernel_sigma2, m.kernel_lengthscale);
      break;
    case KernelFamily::RBF:
      t.kernel = KernelSpec::rbf(m.kernel_sigma2, m.kernel_lengthscale);
      break;
    case KernelFamily::RationalQuadratic:
      t.kernel = KernelSpec::rational_quadratic(m.kernel_sigma2, m.kernel_lengthscale, m.kernel_alpha);
      break;
  }
  t.options.gp_prior = !m.no_gp_prior;
  t.options.masked_elbo = !m.full_elbo;
  // Ablations: no temporal prior, per-step encoder, factorized posterior;
  // the plain VAE also scores zero-filled entries.
  if (m.model == "hivae" || m.model == "vae") {
    t.options.gp_prior = false;
    r.enc.filter_size = 1;
    r.enc.structured = false;
  }
  if (m.model == "vae") t.options.masked_elbo = false;
  r.enc.validate();
  r.dec.validate();
  t.validate();
  return r;
}

void cmd_train(const RunConfig& c, std::ostream& out) {
  const fs::path run = c.out;
  const ModelConfig& m = c.model;
  const std::string name = m.name.empty() ? m.model : m.name;
  if (is_baseline(name)) throw ConfigError("model name '" + name + "' is reserved for a baseline");
  require_file(data_path(run, "train"), "run `gpvae generate` first");
  const TimeSeriesBatch data = load_batch(data_path(run, "train"));
  const ResolvedModel r = resolve_model(m, data.dim, c.seed);

  fs::create_directories(run / "models");
  std::ofstream hist(run / "models" / (name + "_history.csv"), std::ios::binary);
  hist << "epoch,objective\n";
  const auto write_history = [&](const std::vector<double>& h) {
    for (std::size_t e = 0; e < h.size(); ++e) hist << e + 1 << ',' << format_double(h[e]) << '\n';
  };
  try {
    const TrainResult result = train(data, r.enc, r.dec, m.sigma2, r.train);
    save_params(result.params, checkpoint_path(run, name));
    write_history(result.history);
    out << name << ": " << result.params.parameter_count() << " parameters, final objective "
        << format_double(result.history.empty() ? 0.0 : result.history.back()) << "\n";
  } catch (const TrainingDiverged& e) {
    save_params(e.last_good(), run / "models" / (name + "_last_good.ckpt"));
    write_history(e.history());
    throw;
  }
}

std::vector<std::string> present_splits(const fs::path& run) {
  std::vector<std::string> s;
  for (const char* name : kSplitNames)
    if (fs::exists(data_path(run, name))) s.emplace_back(name);
  return s;
}

void cmd_impute(const RunConfig& c, std::ostream& out) {
  const fs::path run = c.out;
  const ImputeConfig& ic = c.impute;
  const auto splits = present_splits(run);
  if (splits.empty()) throw ConfigError("no data in " + run.string() + " (run `gpvae generate` first)");
  std::optional<ModelParams> params;
  if (!is_baseline(ic.model)) {
    require_file(checkpoint_path(run, ic.model), "train the model or pick mean | forward | gp");
    params = load_params(checkpoint_path(run, ic.model));
  }
  fs::create_directories(run / "imputed");
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const TimeSeriesBatch batch = load_batch(data_path(run, splits[s]));
    ImputationResult r;
    r.n = batch.n;
    r.steps = batch.steps;
    r.dim = batch.dim;
    r.n_samples = 1;
    r.std.assign(batch.values.size(), 0.0);
    if (params) {
      r = impute(*params, batch, ic.samples, c.seed + s);
    } else if (ic.model == "mean") {
      r.values = mean_impute(batch);
    } else if (ic.model == "forward") {
      r.values = forward_impute(batch);
    } else {
      GPRegressionSpec spec;
      spec.kernel = KernelSpec::rbf(ic.gp_sigma2, 2.0);
      spec.noise_variance = ic.gp_noise;
      GPImputation g = gp_channel_impute(batch, spec);
      r.values = std::move(g.values);
      for (std::size_t i = 0; i < g.variance.size(); ++i) r.std[i] = std::sqrt(g.variance[i]);
    }
    save_imputation(r, imputed_path(run, ic.model, splits[s]));
    out << ic.model << ": imputed " << splits[s] << " (" << batch.missing_count() << " entries)\n";
  }
}

// Entries hidden by the mask whose true value is known.
std::vector<std::uint8_t> scored_entries(const TimeSeriesBatch& observed, const TimeSeriesBatch& truth) {
  if (observed.values.size() != truth.values.size()) throw ShapeError("data and truth containers differ in shape");
  std::vector<std::uint8_t> m(observed.mask.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = observed.mask[i] && !truth.mask[i];
  return m;
}

void cmd_evaluate(const RunConfig& c, std::ostream& out) {
  const fs::path run = c.out;
  const EvalConfig& ec = c.eval;
  const std::string split = fs::exists(data_path(run, "test")) ? "test" : "train";
  require_file(data_path(run, split), "run `gpvae generate` first");
  require_file(imputed_path(run, ec.model, split), "run `gpvae impute --model " + ec.model + "` first");
  const TimeSeriesBatch observed = load_batch(data_path(run, split));
  const TimeSeriesBatch truth = load_batch(data_path(run, split, true));
  const ImputationResult imputed = load_imputation(imputed_path(run, ec.model, split));
  if (imputed.values.size() != observed.values.size())
    throw ShapeError("imputation does not match the " + split + " split");
  const auto scored = scored_entries(observed, truth);

  std::vector<MetricRow> rows;
  rows.push_back({ec.model, mse_missing(imputed.values, truth.values, scored, observed.series_size())});
  if (fs::exists(checkpoint_path(run, ec.model))) {
    const ModelParams params = load_params(checkpoint_path(run, ec.model));
    const auto pred = reconstruct(params, observed);
    rows.push_back({ec.model, nll_missing_report(pred, truth.values, scored, observed.series_size(),
                                                 params.decoder.likelihood, params.likelihood_sigma2)});
  }
  if (split == "test" && !observed.labels.empty() && fs::exists(imputed_path(run, ec.model, "train"))) {
    const TimeSeriesBatch train_batch = load_batch(data_path(run, "train"));
    const ImputationResult train_imp = load_imputation(imputed_path(run, ec.model, "train"));
    LogisticConfig lc;
    lc.l2 = ec.l2;
    lc.iterations = ec.iterations;
    lc.learning_rate = ec.classifier_lr;
    MetricReport auc;
    auc.name = "auroc";
    auc.mean = downstream_auroc(train_imp.values, train_batch.labels, imputed.values, observed.labels,
                                observed.series_size(), lc);
    auc.n = observed.n;
    rows.push_back({ec.model, auc});
  }
  fs::create_directories(run / "metrics");
  write_metrics_csv(rows, metrics_path(run, ec.model, ".csv"));
  write_metrics_json(rows, metrics_path(run, ec.model, ".json"));
  for (const auto& r : rows)
    out << ec.model << " " << r.report.name << " = " << format_double(r.report.mean) << " +- "
        << format_double(r.report.std_error) << " (n=" << r.report.n << ")\n";
}

void cmd_report(const RunConfig& c, std::ostream& out) {
  const fs::path run = c.out;
  const fs::path dir = run / "metrics";
  if (!fs::is_directory(dir)) throw ConfigError("no metrics in " + run.string() + " (run `gpvae evaluate` first)");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no metrics in " + dir.string());

  // model -> metric -> report, in file order.
  std::vector<std::string> models;
  std::map<std::string, std::map<std::string, MetricReport>> table;
  std::vector<MetricRow> all;
  for (const auto& f : files)
    for (auto& row : read_metrics_csv(f)) {
      if (!table.count(row.model)) models.push_back(row.model);
      table[row.model][row.report.name] = row.report;
      all.push_back(std::move(row));
    }
  std::stable_sort(models.begin(), models.end(), [&](const std::string& a, const std::string& b) {
    const auto ma = table[a].count("mse") ? table[a]["mse"].mean : INFINITY;
    const auto mb = table[b].count("mse") ? table[b]["mse"].mean : INFINITY;
    return ma < mb;
  });

  std::ostringstream csv;
  csv << "model,mse,mse_se,nll,nll_se,auroc\n";
  const auto cell = [&](const std::string& model, const std::string& metric, bool se) -> std::string {
    const auto it = table[model].find(metric);
    if (it == table[model].end()) return "";
    return format_double(se ? it->second.std_error : it->second.mean);
  };
  out << std::left << std::setw(10) << "model" << std::setw(44) << "mse" << std::setw(44) << "nll" << "auroc\n";
  for (const auto& m : models) {
    csv << m << ',' << cell(m, "mse", false) << ',' << cell(m, "mse", true) << ',' << cell(m, "nll", false) << ','
        << cell(m, "nll", true) << ',' << cell(m, "auroc", false) << '\n';
    const auto pm = [&](const std::string& metric) {
      const std::string v = cell(m, metric, false);
      return v.empty() ? std::string("-") : v + " +- " + cell(m, metric, true);
    };
    out << std::setw(10) << m << std::setw(44) << pm("mse") << std::setw(44) << pm("nll") << cell(m, "auroc", false)
        << "\n";
  }
  write_text(run / "report.csv", csv.str());

  // Curve data for one series.
  std::string plot_model = c.report.plot_model;
  if (plot_model.empty()) {
    for (const auto& m : models)
      if (fs::exists(imputed_path(run, m, c.report.plot_split))) {
        plot_model = m;
        break;
      }
  }
  if (plot_model.empty()) return;
  const fs::path ip = imputed_path(run, plot_model, c.report.plot_split);
  require_file(ip, "run `gpvae impute --model " + plot_model + "` first");
  const TimeSeriesBatch observed = load_batch(data_path(run, c.report.plot_split));
  const TimeSeriesBatch truth = load_batch(data_path(run, c.report.plot_split, true));
  const ImputationResult imp = load_imputation(ip);
  if (c.report.series >= observed.n) throw ConfigError("--series is out of range");
  std::ostringstream plot;
  plot << "time,channel,truth,observed,imputed,std\n";
  const std::size_t i = c.report.series;
  for (std::size_t t = 0; t < observed.steps; ++t)
    for (std::size_t j = 0; j < observed.dim; ++j) {
      const std::size_t k = observed.index(i, t, j);
      plot << format_double(observed.timestamps[t]) << ',' << j << ','
           << (truth.mask[k] ? "" : format_double(truth.values[k])) << ','
           << (observed.mask[k] ? "" : format_double(observed.values[k])) << ',' << format_double(imp.values[k])
           << ',' << format_double(imp.std[k]) << '\n';
    }
  write_text(run / ("plot_" + plot_model + ".csv"), plot.str());
}

void cmd_pipeline(RunConfig c, std::ostream& out) {
  cmd_generate(c, out);
  for (const auto& m : c.models) {
    if (is_vae(m)) {
      c.model.model = m;
      c.model.name = m;
      cmd_train(c, out);
    } else if (!is_baseline(m)) {
      throw ConfigError("unknown model '" + m + "' in --models");
    }
    c.impute.model = m;
    cmd_impute(c, out);
    c.eval.model = m;
    cmd_evaluate(c, out);
  }
  cmd_report(c, out);
}

int fail(std::ostream& err, std::string_view command, const std::exception& e, int code) {
  err << "gpvae " << command << ": " << e.what() << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GP-VAE time-series imputation: data generation, training, imputation and evaluation", "gpvae"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file (command-line flags win)");
  app.fallthrough();

  RunConfig c;
  auto* gen = app.add_subcommand("generate", "Build a dataset with missing entries and train/val/test splits");
  add_common(gen, c);
  add_data_options(gen, c.data);

  auto* tr = app.add_subcommand("train", "Train gpvae or an ablation (hivae, vae) on the training split");
  add_common(tr, c);
  add_model_options(tr, c.model, true);

  auto* im = app.add_subcommand("impute", "Impute every split with a trained model or a baseline");
  add_common(im, c);
  add_impute_options(im, c.impute, true);

  auto* ev = app.add_subcommand("evaluate", "Score an imputation: masked MSE, NLL, downstream AUROC");
  add_common(ev, c);
  add_eval_options(ev, c.eval, true);

  auto* rep = app.add_subcommand("report", "Comparison table and per-series curve CSV");
  add_common(rep, c);
  add_report_options(rep, c.report);

  auto* pipe = app.add_subcommand("pipeline", "generate, then train/impute/evaluate each model, then report");
  add_common(pipe, c);
  add_data_options(pipe, c.data);
  add_model_options(pipe, c.model, false);
  add_impute_options(pipe, c.impute, false);
  add_eval_options(pipe, c.eval, false);
  add_report_options(pipe, c.report);
  pipe->add_option("--models", c.models, "Models to run, in order")->delimiter(',')->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    write_manifest(c.out, command, app, args, c.seed);
    if (sub == gen) cmd_generate(c, out);
    else if (sub == tr) cmd_train(c, out);
    else if (sub == im) cmd_impute(c, out);
    else if (sub == ev) cmd_evaluate(c, out);
    else if (sub == rep) cmd_report(c, out);
    else cmd_pipeline(c, out);
  } catch (const ConfigError& e) {
    return fail(err, command, e, kConfigError);
  } catch (const NumericError& e) {
    return fail(err, command, e, kNumericError);
  } catch (const std::exception& e) {
    return fail(err, command, e, kFailure);
  }
  return kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace gpvae::cli
