#include "gpvae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "gpvae/binary_io.hpp"
#include "gpvae/error.hpp"

namespace gpvae {

// ---------------------------------------------------------------------------
// Batches

std::span<const double> TimeSeriesBatch::series_values(std::size_t i) const {
  return std::span<const double>(values).subspan(i * series_size(), series_size());
}

std::span<const std::uint8_t> TimeSeriesBatch::series_mask(std::size_t i) const {
  return std::span<const std::uint8_t>(mask).subspan(i * series_size(), series_size());
}

std::size_t TimeSeriesBatch::missing_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

double TimeSeriesBatch::missing_rate() const {
  return mask.empty() ? 0.0 : static_cast<double>(missing_count()) / static_cast<double>(mask.size());
}

void TimeSeriesBatch::validate() const {
  const std::size_t total = n * steps * dim;
  if (values.size() != total || mask.size() != total)
    throw ShapeError("batch: values/mask length does not match n*T*d");
  if (timestamps.size() != steps) throw ShapeError("batch: need one timestamp per step");
  if (!labels.empty() && labels.size() != n) throw ShapeError("batch: need one label per series");
  for (std::size_t i = 0; i < total; ++i)
    if (mask[i] && values[i] != 0.0) throw DomainError("batch: missing entries must be zero-filled");
  if (!timestamps.empty() && timestamps.front() != 0.0) throw DomainError("batch: timestamps must start at 0");
  for (std::size_t t = 1; t < timestamps.size(); ++t)
    if (!(timestamps[t] > timestamps[t - 1])) throw DomainError("batch: timestamps must be strictly increasing");
}

std::span<const double> GroundTruth::series_values(std::size_t i) const {
  const std::size_t s = steps * dim;
  return std::span<const double>(values).subspan(i * s, s);
}

TimeSeriesBatch apply_mask(const GroundTruth& truth, std::span<const std::uint8_t> mask) {
  if (mask.size() != truth.values.size()) throw ShapeError("apply_mask: mask length does not match data");
  TimeSeriesBatch b;
  b.n = truth.n;
  b.steps = truth.steps;
  b.dim = truth.dim;
  b.timestamps = truth.timestamps;
  b.labels = truth.labels;
  b.mask.assign(mask.begin(), mask.end());
  b.values.resize(truth.values.size());
  for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] = mask[i] ? 0.0 : truth.values[i];
  return b;
}

TimeSeriesBatch observe_all(const GroundTruth& truth) {
  const std::vector<std::uint8_t> none(truth.values.size(), 0);
  return apply_mask(truth, none);
}

TimeSeriesBatch select(const TimeSeriesBatch& batch, std::span<const std::size_t> indices) {
  TimeSeriesBatch out;
  out.n = indices.size();
  out.steps = batch.steps;
  out.dim = batch.dim;
  out.timestamps = batch.timestamps;
  const std::size_t s = batch.series_size();
  out.values.reserve(out.n * s);
  out.mask.reserve(out.n * s);
  for (std::size_t i : indices) {
    if (i >= batch.n) throw ShapeError("select: series index out of range");
    auto v = batch.series_values(i);
    auto m = batch.series_mask(i);
    out.values.insert(out.values.end(), v.begin(), v.end());
    out.mask.insert(out.mask.end(), m.begin(), m.end());
    if (!batch.labels.empty()) out.labels.push_back(batch.labels[i]);
  }
  return out;
}

GroundTruth select(const GroundTruth& truth, std::span<const std::size_t> indices) {
  GroundTruth out;
  out.n = indices.size();
  out.steps = truth.steps;
  out.dim = truth.dim;
  out.timestamps = truth.timestamps;
  for (std::size_t i : indices) {
    if (i >= truth.n) throw ShapeError("select: series index out of range");
    auto v = truth.series_values(i);
    out.values.insert(out.values.end(), v.begin(), v.end());
    if (!truth.labels.empty()) out.labels.push_back(truth.labels[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotating glyphs

namespace {

struct Segment {
  double x0, y0, x1, y1;
};

constexpr double kStrokeHalfWidth = 0.2;

double distance_to_segment(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double u = len2 > 0.0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const double ex = s.x0 + u * dx - px, ey = s.y0 + u * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

// Three strokes between points of a 5x5 lattice on [-0.8, 0.8]^2; the
// stream depends only on the label so glyphs are stable across datasets.
std::vector<Segment> glyph_strokes(std::size_t label) {
  std::mt19937_64 rng(0x6a09e667f3bcc908ULL + 0x9e3779b97f4a7c15ULL * (label + 1));
  std::uniform_int_distribution<int> pick(0, 4);
  auto coord = [&] { return -0.8 + 0.4 * pick(rng); };
  std::vector<Segment> strokes;
  while (strokes.size() < 3) {
    Segment s{coord(), coord(), coord(), coord()};
    if (std::hypot(s.x1 - s.x0, s.y1 - s.y0) < 0.7) continue;
    strokes.push_back(s);
  }
  return strokes;
}

}  // namespace

std::vector<double> render_glyph(std::size_t label, std::size_t grid_size, double angle) {
  const auto strokes = glyph_strokes(label);
  std::vector<double> frame(grid_size * grid_size, 0.0);
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t r = 0; r < grid_size; ++r) {
    for (std::size_t col = 0; col < grid_size; ++col) {
      const double px = (static_cast<double>(col) + 0.5) / static_cast<double>(grid_size) * 2.0 - 1.0;
      const double py = 1.0 - (static_cast<double>(r) + 0.5) / static_cast<double>(grid_size) * 2.0;
      // Rotate the pixel back into the glyph frame.
      const double gx = c * px + s * py, gy = -s * px + c * py;
      for (const auto& seg : strokes)
        if (distance_to_segment(gx, gy, seg) <= kStrokeHalfWidth) {
          frame[r * grid_size + col] = 1.0;
          break;
        }
    }
  }
  return frame;
}

GroundTruth generate_rotating_patterns(const RotatingPatternsConfig& cfg) {
  if (cfg.grid_size == 0 || cfg.grid_size > 16) throw ConfigError("rotating patterns: grid_size must be in [1, 16]");
  if (cfg.steps < 2) throw ConfigError("rotating patterns: need T >= 2");
  if (cfg.label_count == 0) throw ConfigError("rotating patterns: need at least one label");
  if (cfg.rotation_std < 0.0) throw ConfigError("rotating patterns: rotation_std must be >= 0");

  GroundTruth g;
  g.n = cfg.n;
  g.steps = cfg.steps;
  g.dim = cfg.grid_size * cfg.grid_size;
  g.timestamps.resize(cfg.steps);
  std::iota(g.timestamps.begin(), g.timestamps.end(), 0.0);
  g.values.reserve(g.n * g.steps * g.dim);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> label_dist(0, cfg.label_count - 1);
  std::normal_distribution<double> step(0.0, 1.0);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const std::size_t label = label_dist(rng);
    g.labels.push_back(static_cast<int>(label));
    double angle = 0.0;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      if (t > 0) angle += cfg.rotation_std * step(rng);
      const auto frame = render_glyph(label, cfg.grid_size, angle);
      g.values.insert(g.values.end(), frame.begin(), frame.end());
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

struct CsvCell {
  double time;
  std::size_t channel;
  double value;
  std::size_t line;
};

}  // namespace

CsvLoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open CSV " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(path.string() + ": empty file");
  const auto header = split_row(line);

  auto column = [&](const std::string& name) -> std::ptrdiff_t {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const std::ptrdiff_t id_col = column(schema.id_column);
  const std::ptrdiff_t time_col = column(schema.time_column);
  if (id_col < 0 || time_col < 0)
    throw ConfigError(path.string() + ": header lacks id column '" + schema.id_column + "' or time column '" +
                      schema.time_column + "'");
  std::ptrdiff_t label_col = -1;
  if (!schema.label_column.empty()) {
    label_col = column(schema.label_column);
    if (label_col < 0) throw ConfigError(path.string() + ": header lacks label column '" + schema.label_column + "'");
  }

  CsvLoadResult result;
  std::vector<std::size_t> channel_cols;
  if (schema.channels.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (static_cast<std::ptrdiff_t>(c) != id_col && static_cast<std::ptrdiff_t>(c) != time_col &&
          static_cast<std::ptrdiff_t>(c) != label_col) {
        channel_cols.push_back(c);
        result.channels.push_back(header[c]);
      }
  } else {
    for (const auto& name : schema.channels) {
      const auto c = column(name);
      if (c < 0) throw ConfigError(path.string() + ": header lacks channel column '" + name + "'");
      channel_cols.push_back(static_cast<std::size_t>(c));
      result.channels.push_back(name);
    }
  }
  if (channel_cols.empty()) throw ConfigError(path.string() + ": no channel columns");

  std::map<std::string, std::size_t> series_index;
  std::vector<std::vector<CsvCell>> cells;
  std::vector<double> last_time;
  std::vector<int> labels;
  bool any_label = false;

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto row = split_row(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (row.size() != header.size())
      throw ConfigError(where + "expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(row.size()));
    const std::string& id = row[static_cast<std::size_t>(id_col)];
    if (id.empty()) throw ConfigError(where + "empty series id");
    double time = 0.0;
    if (!parse_double(row[static_cast<std::size_t>(time_col)], time)) throw ConfigError(where + "bad time value");
    if (schema.bin_width > 0.0 && time < 0.0) throw ConfigError(where + "negative time with binning");

    auto [it, inserted] = series_index.try_emplace(id, cells.size());
    if (inserted) {
      cells.emplace_back();
      last_time.push_back(time);
      labels.push_back(0);
      result.series_ids.push_back(id);
    }
    const std::size_t s = it->second;
    if (time < last_time[s]) throw ConfigError(where + "time decreases within series '" + id + "'");
    last_time[s] = time;

    if (label_col >= 0) {
      const std::string& cell = row[static_cast<std::size_t>(label_col)];
      if (!cell.empty()) {
        double lv = 0.0;
        if (!parse_double(cell, lv) || lv != std::floor(lv)) throw ConfigError(where + "bad label value");
        labels[s] = static_cast<int>(lv);
        any_label = true;
      }
    }
    for (std::size_t c = 0; c < channel_cols.size(); ++c) {
      const std::string& cell = row[channel_cols[c]];
      if (cell.empty()) continue;
      double v = 0.0;
      if (!parse_double(cell, v))
        throw ConfigError(where + "bad value '" + cell + "' in column '" + result.channels[c] + "'");
      cells[s].push_back({time, c, v, line_no});
    }
  }
  if (cells.empty()) throw ConfigError(path.string() + ": no data rows");

  // Time grid.
  std::vector<double> grid;
  auto slot_of = [&](double time) -> std::size_t {
    if (schema.bin_width > 0.0) return static_cast<std::size_t>(std::floor(time / schema.bin_width + 1e-9));
    return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), time) - grid.begin());
  };
  std::size_t steps = 0;
  if (schema.bin_width > 0.0) {
    for (double t : last_time) steps = std::max(steps, slot_of(t) + 1);
    grid.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) grid[t] = static_cast<double>(t) * schema.bin_width;
  } else {
    // Re-read times from cells plus row times (rows with all cells empty
    // still define a grid point).
    std::ifstream again(path);
    std::getline(again, line);
    while (std::getline(again, line)) {
      if (trim(line).empty()) continue;
      const auto row = split_row(line);
      double time = 0.0;
      parse_double(row[static_cast<std::size_t>(time_col)], time);
      grid.push_back(time);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    steps = grid.size();
  }

  TimeSeriesBatch& b = result.batch;
  b.n = cells.size();
  b.steps = steps;
  b.dim = channel_cols.size();
  b.values.assign(b.n * steps * b.dim, 0.0);
  b.mask.assign(b.n * steps * b.dim, 1);
  const double origin = grid.empty() ? 0.0 : grid.front();
  b.timestamps.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) b.timestamps[t] = grid[t] - origin;
  if (any_label) b.labels = labels;

  for (std::size_t s = 0; s < cells.size(); ++s) {
    std::map<std::pair<std::size_t, std::size_t>, double> last_exact_time;
    for (const CsvCell& cell : cells[s]) {
      const std::size_t slot = slot_of(cell.time);
      const std::size_t idx = b.index(s, slot, cell.channel);
      const auto key = std::make_pair(slot, cell.channel);
      if (auto prev = last_exact_time.find(key); prev != last_exact_time.end() && prev->second == cell.time) {
        result.warnings.push_back(path.string() + ":" + std::to_string(cell.line) + ": duplicate value for series '" +
                                  result.series_ids[s] + "', channel '" + result.channels[cell.channel] +
                                  "'; keeping the last one");
      }
      last_exact_time[key] = cell.time;
      b.values[idx] = cell.value;
      b.mask[idx] = 0;
    }
  }
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  return result;
}

void export_csv(const TimeSeriesBatch& batch, const std::filesystem::path& path,
                std::span<const std::string> channel_names, std::span<const std::string> series_ids) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write CSV " + path.string());
  const bool labelled = !batch.labels.empty();
  os << "id,time";
  if (labelled) os << ",label";
  for (std::size_t j = 0; j < batch.dim; ++j)
    os << ',' << (j < channel_names.size() ? channel_names[j] : "c" + std::to_string(j));
  os << '\n';
  for (std::size_t i = 0; i < batch.n; ++i) {
    const std::string id = i < series_ids.size() ? series_ids[i] : std::to_string(i);
    for (std::size_t t = 0; t < batch.steps; ++t) {
      os << id << ',' << format_double(batch.timestamps[t]);
      if (labelled) os << ',' << batch.labels[i];
      for (std::size_t j = 0; j < batch.dim; ++j) {
        os << ',';
        const std::size_t idx = batch.index(i, t, j);
        if (!batch.mask[idx]) os << format_double(batch.values[idx]);
      }
      os << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Normalization

std::pair<TimeSeriesBatch, NormStats> normalize(const TimeSeriesBatch& batch, const std::optional<NormStats>& stats) {
  NormStats s;
  if (stats) {
    s = *stats;
    if (s.mean.size() != batch.dim || s.std.size() != batch.dim) throw ShapeError("normalize: stats dimension mismatch");
  } else {
    s.mean.assign(batch.dim, 0.0);
    s.std.assign(batch.dim, 1.0);
    std::vector<double> sum(batch.dim, 0.0), sq(batch.dim, 0.0);
    std::vector<std::size_t> count(batch.dim, 0);
    for (std::size_t idx = 0; idx < batch.values.size(); ++idx) {
      if (batch.mask[idx]) continue;
      const std::size_t j = idx % batch.dim;
      sum[j] += batch.values[idx];
      ++count[j];
    }
    for (std::size_t j = 0; j < batch.dim; ++j)
      if (count[j]) s.mean[j] = sum[j] / static_cast<double>(count[j]);
    for (std::size_t idx = 0; idx < batch.values.size(); ++idx) {
      if (batch.mask[idx]) continue;
      const std::size_t j = idx % batch.dim;
      const double dv = batch.values[idx] - s.mean[j];
      sq[j] += dv * dv;
    }
    for (std::size_t j = 0; j < batch.dim; ++j) {
      const double sd = count[j] ? std::sqrt(sq[j] / static_cast<double>(count[j])) : 0.0;
      s.std[j] = sd < 1e-12 ? 1.0 : sd;
    }
  }
  TimeSeriesBatch out = batch;
  for (std::size_t idx = 0; idx < out.values.size(); ++idx) {
    if (out.mask[idx]) continue;
    const std::size_t j = idx % out.dim;
    out.values[idx] = (out.values[idx] - s.mean[j]) / s.std[j];
  }
  return {std::move(out), std::move(s)};
}

TimeSeriesBatch denormalize(const TimeSeriesBatch& batch, const NormStats& stats) {
  TimeSeriesBatch out = batch;
  for (std::size_t idx = 0; idx < out.values.size(); ++idx) {
    if (out.mask[idx]) continue;
    const std::size_t j = idx % out.dim;
    out.values[idx] = out.values[idx] * stats.std[j] + stats.mean[j];
  }
  return out;
}

std::vector<double> denormalize_values(std::span<const double> values, std::size_t dim, const NormStats& stats) {
  std::vector<double> out(values.begin(), values.end());
  for (std::size_t idx = 0; idx < out.size(); ++idx) {
    const std::size_t j = idx % dim;
    out[idx] = out[idx] * stats.std[j] + stats.mean[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

SplitIndices split_indices(std::size_t n, std::span<const int> labels, std::array<double, 3> fractions,
                           std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split: fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
  if (!labels.empty() && labels.size() != n) throw ShapeError("split: need one label per series");

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[labels.empty() ? 0 : labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};
  for (auto& [label, members] : groups) {
    std::shuffle(members.begin(), members.end(), rng);
    // Largest-remainder apportionment of this class across the splits.
    const double m = static_cast<double>(members.size());
    std::array<std::size_t, 3> count{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double exact = m * fractions[k];
      count[k] = static_cast<std::size_t>(std::floor(exact));
      rem[k] = exact - std::floor(exact);
      assigned += count[k];
    }
    while (assigned < members.size()) {
      const auto k = static_cast<std::size_t>(std::max_element(rem.begin(), rem.end()) - rem.begin());
      ++count[k];
      rem[k] = -1.0;
      ++assigned;
    }
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k)
      for (std::size_t c = 0; c < count[k]; ++c) parts[k]->push_back(members[pos++]);
  }
  for (std::size_t k = 0; k < 3; ++k) {
    std::sort(parts[k]->begin(), parts[k]->end());
    if (fractions[k] > 0.0 && parts[k]->empty())
      throw ConfigError("split: fraction " + std::to_string(fractions[k]) + " of " + std::to_string(n) +
                        " series leaves an empty split");
  }
  return out;
}

BatchSplit split(const TimeSeriesBatch& batch, std::array<double, 3> fractions, std::uint64_t seed) {
  const SplitIndices idx = split_indices(batch.n, batch.labels, fractions, seed);
  return {select(batch, idx.train), select(batch, idx.val), select(batch, idx.test)};
}

// ---------------------------------------------------------------------------
// Binary containers

namespace {

constexpr std::string_view kBatchMagic = "GPVBATCH";
constexpr std::uint32_t kBatchVersion = 1;

}  // namespace

void save_batch(const TimeSeriesBatch& batch, const std::filesystem::path& path) {
  batch.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  io::write_magic(os, kBatchMagic);
  io::write<std::uint32_t>(os, kBatchVersion);
  io::write<std::uint64_t>(os, batch.n);
  io::write<std::uint64_t>(os, batch.steps);
  io::write<std::uint64_t>(os, batch.dim);
  io::write_doubles(os, batch.timestamps);
  io::write_doubles(os, batch.values);
  const auto packed = io::pack_bits(batch.mask);
  os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  io::write<std::uint8_t>(os, batch.labels.empty() ? 0 : 1);
  for (int l : batch.labels) io::write<std::int32_t>(os, l);
  if (!os) throw IoError("failed writing " + path.string());
}

TimeSeriesBatch load_batch(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::expect_magic(is, kBatchMagic, "batch");
  if (io::read<std::uint32_t>(is) != kBatchVersion) throw IoError("unsupported batch version in " + path.string());
  TimeSeriesBatch b;
  b.n = io::read<std::uint64_t>(is);
  b.steps = io::read<std::uint64_t>(is);
  b.dim = io::read<std::uint64_t>(is);
  const std::size_t total = b.n * b.steps * b.dim;
  b.timestamps.resize(b.steps);
  io::read_doubles(is, b.timestamps);
  b.values.resize(total);
  io::read_doubles(is, b.values);
  std::vector<std::uint8_t> packed((total + 7) / 8);
  is.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!is) throw IoError("unexpected end of file in " + path.string());
  b.mask = io::unpack_bits(packed, total);
  if (io::read<std::uint8_t>(is)) {
    b.labels.resize(b.n);
    for (int& l : b.labels) l = io::read<std::int32_t>(is);
  }
  b.validate();
  return b;
}

void save_truth(const GroundTruth& truth, const std::filesystem::path& path) { save_batch(observe_all(truth), path); }

GroundTruth load_truth(const std::filesystem::path& path) {
  TimeSeriesBatch b = load_batch(path);
  if (b.missing_count() != 0) throw IoError(path.string() + " is not a complete ground-truth container");
  GroundTruth g;
  g.n = b.n;
  g.steps = b.steps;
  g.dim = b.dim;
  g.values = std::move(b.values);
  g.timestamps = std::move(b.timestamps);
  g.labels = std::move(b.labels);
  return g;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("unexpected end of IDX file");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  if (read_be32(is) != 0x00000803u) throw IoError(path.string() + ": not an IDX image file (magic 0x00000803)");
  IdxImages img;
  img.count = read_be32(is);
  img.rows = read_be32(is);
  img.cols = read_be32(is);
  img.pixels.resize(img.count * img.rows * img.cols);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw IoError(path.string() + ": truncated pixel data");
  return img;
}

std::vector<int> read_idx_labels(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  if (read_be32(is) != 0x00000801u) throw IoError(path.string() + ": not an IDX label file (magic 0x00000801)");
  const std::uint32_t count = read_be32(is);
  std::vector<unsigned char> raw(count);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (!is) throw IoError(path.string() + ": truncated label data");
  return {raw.begin(), raw.end()};
}

}  // namespace gpvae
