#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "gpvae/data.hpp"
#include "gpvae/error.hpp"

using namespace gpvae;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const char* name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

double mean_abs_step_change(const GroundTruth& g) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t t = 1; t < g.steps; ++t)
      for (std::size_t j = 0; j < g.dim; ++j) {
        const std::size_t a = (i * g.steps + t) * g.dim + j, b = a - g.dim;
        total += std::abs(g.values[a] - g.values[b]);
        ++count;
      }
  return total / static_cast<double>(count);
}

}  // namespace

TEST_CASE("rotating patterns") {
  RotatingPatternsConfig cfg;
  cfg.n = 40;
  cfg.seed = 3;
  const GroundTruth a = generate_rotating_patterns(cfg);
  CHECK(a.dim == 64);
  CHECK(a.values.size() == 40 * 10 * 64);
  CHECK(a.labels.size() == 40);
  for (double v : a.values) CHECK((v == 0.0 || v == 1.0));
  CHECK(generate_rotating_patterns(cfg).values == a.values);

  // Glyph classes are distinct upright.
  for (std::size_t l = 0; l < 10; ++l)
    for (std::size_t m = l + 1; m < 10; ++m) CHECK(render_glyph(l, 8, 0.0) != render_glyph(m, 8, 0.0));

  cfg.rotation_std = 0.0;
  const GroundTruth still = generate_rotating_patterns(cfg);
  CHECK(mean_abs_step_change(still) == 0.0);

  double prev = 0.0;
  for (double s : {0.1, 0.5, 1.0}) {
    cfg.rotation_std = s;
    cfg.n = 200;
    const double change = mean_abs_step_change(generate_rotating_patterns(cfg));
    CHECK(change > prev);
    prev = change;
  }
  cfg.grid_size = 17;
  CHECK_THROWS_AS(generate_rotating_patterns(cfg), ConfigError);
}

TEST_CASE("masking keeps zero fill and truth separate") {
  RotatingPatternsConfig cfg;
  cfg.n = 3;
  const GroundTruth g = generate_rotating_patterns(cfg);
  std::vector<std::uint8_t> mask(g.values.size(), 0);
  for (std::size_t i = 0; i < mask.size(); i += 3) mask[i] = 1;
  const TimeSeriesBatch b = apply_mask(g, mask);
  CHECK_NOTHROW(b.validate());
  for (std::size_t i = 0; i < mask.size(); ++i) CHECK(b.values[i] == (mask[i] ? 0.0 : g.values[i]));
  CHECK(b.missing_count() == (mask.size() + 2) / 3);

  TimeSeriesBatch broken = b;
  broken.values[0] = 1.0;
  CHECK_THROWS(broken.validate());
  broken = b;
  broken.timestamps[2] = broken.timestamps[1];
  CHECK_THROWS(broken.validate());
}

TEST_CASE("CSV ingestion") {
  const auto p = write_file("gpvae_data_a.csv", "id,time,x,y\ns1,0,1.5,\ns1,1,2,3\n");
  const CsvLoadResult r = load_csv(p);
  CHECK(r.batch.n == 1);
  CHECK(r.batch.steps == 2);
  CHECK(r.batch.dim == 2);
  CHECK(r.batch.missing_count() == 1);
  CHECK(r.batch.mask[1] == 1);
  CHECK(r.batch.values[2] == 2.0);
  CHECK(r.channels == std::vector<std::string>{"x", "y"});
}

TEST_CASE("CSV duplicates keep the last value and warn") {
  const auto p = write_file("gpvae_data_b.csv", "id,time,x\na,0,1\na,0,7\na,2,3\n");
  const CsvLoadResult r = load_csv(p);
  CHECK(r.batch.values[0] == 7.0);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find(":3:") != std::string::npos);
}

TEST_CASE("CSV errors name the line") {
  const auto bad = write_file("gpvae_data_c.csv", "id,time,x\na,0,1\na,1\n");
  try {
    load_csv(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  const auto backwards = write_file("gpvae_data_d.csv", "id,time,x\na,2,1\na,1,1\n");
  CHECK_THROWS_AS(load_csv(backwards), ConfigError);
  const auto word = write_file("gpvae_data_e.csv", "id,time,x\na,0,abc\n");
  CHECK_THROWS_AS(load_csv(word), ConfigError);
}

TEST_CASE("CSV binning keeps the latest value per bin") {
  const auto p = write_file("gpvae_data_f.csv", "id,time,x\na,0.2,1\na,0.7,2\na,1.1,5\nb,0.5,4\n");
  CsvSchema s;
  s.bin_width = 1.0;
  const CsvLoadResult r = load_csv(p, s);
  CHECK(r.batch.steps == 2);
  CHECK(r.batch.timestamps == std::vector<double>{0.0, 1.0});
  CHECK(r.batch.values[0] == 2.0);
  CHECK(r.batch.values[1] == 5.0);
  CHECK(r.batch.mask[3] == 1);
}

TEST_CASE("CSV export and import round-trip") {
  RotatingPatternsConfig cfg;
  cfg.n = 4;
  cfg.steps = 3;
  cfg.grid_size = 2;
  GroundTruth g = generate_rotating_patterns(cfg);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += 0.1 * std::sin(static_cast<double>(i)) + 1e-17;
  std::vector<std::uint8_t> mask(g.values.size(), 0);
  for (std::size_t i = 1; i < mask.size(); i += 4) mask[i] = 1;
  const TimeSeriesBatch b = apply_mask(g, mask);
  const fs::path p = fs::temp_directory_path() / "gpvae_data_rt.csv";
  export_csv(b, p);
  CsvSchema s;
  s.label_column = "label";
  const CsvLoadResult r = load_csv(p, s);
  CHECK(r.batch.values == b.values);
  CHECK(r.batch.mask == b.mask);
  CHECK(r.batch.timestamps == b.timestamps);
  CHECK(r.batch.labels == b.labels);
}

TEST_CASE("normalization") {
  TimeSeriesBatch b;
  b.n = 1;
  b.steps = 4;
  b.dim = 2;
  b.timestamps = {0, 1, 2, 3};
  b.values = {1, 5, 2, 5, 0, 5, 3, 0};
  b.mask = {0, 0, 0, 0, 1, 0, 0, 1};
  const auto [z, stats] = normalize(b);
  CHECK(stats.mean[0] == doctest::Approx(2.0));
  CHECK(stats.std[1] == 1.0);  // constant channel
  CHECK(z.values[1] == 0.0);
  CHECK(z.values[4] == 0.0);
  CHECK(z.mask == b.mask);
  const TimeSeriesBatch back = denormalize(z, stats);
  for (std::size_t i = 0; i < b.values.size(); ++i) CHECK(std::abs(back.values[i] - b.values[i]) < 1e-12);
  const auto [z2, stats2] = normalize(z);
  CHECK(std::abs(stats2.mean[0]) < 1e-12);
  CHECK(stats2.std[0] == doctest::Approx(1.0));
}

TEST_CASE("splits are disjoint, deterministic and stratified") {
  std::vector<int> labels;
  for (int i = 0; i < 70; ++i) labels.push_back(i % 3);
  const SplitIndices s = split_indices(70, labels, {5.0 / 7, 1.0 / 7, 1.0 / 7}, 9);
  CHECK(s.train.size() + s.val.size() + s.test.size() == 70);
  std::vector<int> seen(70, 0);
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (auto i : *part) ++seen[i];
  for (int v : seen) CHECK(v == 1);
  const SplitIndices again = split_indices(70, labels, {5.0 / 7, 1.0 / 7, 1.0 / 7}, 9);
  CHECK(again.test == s.test);

  for (const auto* part : {&s.train, &s.val, &s.test}) {
    std::map<int, int> counts;
    for (auto i : *part) ++counts[labels[i]];
    const double expect = static_cast<double>(part->size()) / 3.0;
    for (auto [l, c] : counts) CHECK(std::abs(c - expect) <= 1.0);
  }

  const SplitIndices all = split_indices(10, {}, {1, 0, 0}, 1);
  CHECK(all.train.size() == 10);
  CHECK_THROWS(split_indices(2, {}, {0.5, 0.25, 0.25}, 1));
}

TEST_CASE("binary batch container round-trips") {
  RotatingPatternsConfig cfg;
  cfg.n = 5;
  const GroundTruth g = generate_rotating_patterns(cfg);
  std::vector<std::uint8_t> mask(g.values.size(), 0);
  for (std::size_t i = 0; i < mask.size(); i += 5) mask[i] = 1;
  const TimeSeriesBatch b = apply_mask(g, mask);
  const fs::path p = fs::temp_directory_path() / "gpvae_data.bin";
  save_batch(b, p);
  const TimeSeriesBatch c = load_batch(p);
  CHECK(c.values == b.values);
  CHECK(c.mask == b.mask);
  CHECK(c.labels == b.labels);
  save_truth(g, p);
  CHECK(load_truth(p).values == g.values);
  fs::resize_file(p, 20);
  CHECK_THROWS_AS(load_batch(p), IoError);
}

TEST_CASE("IDX reader") {
  const fs::path p = fs::temp_directory_path() / "gpvae_idx.bin";
  {
    std::ofstream os(p, std::ios::binary);
    const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
    os.write(reinterpret_cast<const char*>(header), sizeof header);
    for (int i = 0; i < 12; ++i) os.put(static_cast<char>(i * 20));
  }
  const IdxImages im = read_idx_images(p);
  CHECK(im.count == 2);
  CHECK(im.rows == 2);
  CHECK(im.cols == 3);
  CHECK(im.pixels[11] == 220);
  CHECK_THROWS_AS(read_idx_labels(p), IoError);
}
