// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lf2l/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lf2l/error.hpp"
#include "lf2l/rng.hpp"

namespace lf2l::data {
namespace {

constexpr std::string_view kUnknownToken = "UNKNOWN";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> random_unit_vector(std::size_t dim, RandomEngine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    for (double& x : v) x = normal(rng);
    norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  } while (norm == 0.0);
  for (double& x : v) x /= norm;
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

struct LatentView {
  std::string name;
  std::vector<double> projection;
  double noise_sd = 0.0;
  std::size_t levels = 0;  // > 0: discretized into this many categories
};

// Orthonormal basis of the span of the views' projections.
std::vector<std::vector<double>> span_basis(const std::vector<LatentView>& views) {
  std::vector<std::vector<double>> basis;
  for (const auto& view : views) {
    std::vector<double> v = view.projection;
    for (const auto& b : basis) {
      const double c = dot(v, b);
      for (std::size_t k = 0; k < v.size(); ++k) v[k] -= c * b[k];
    }
    const double n = norm(v);
    if (n > 1e-9) {
      for (double& x : v) x /= n;
      basis.push_back(std::move(v));
    }
  }
  return basis;
}

// Splits v into its projection onto the basis span and the remainder.
std::pair<std::vector<double>, std::vector<double>> split_by_span(
    const std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  std::vector<double> inside(v.size(), 0.0);
  for (const auto& b : basis) {
    const double c = dot(v, b);
    for (std::size_t k = 0; k < v.size(); ++k) inside[k] += c * b[k];
  }
  std::vector<double> outside(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) outside[k] = v[k] - inside[k];
  return {std::move(inside), std::move(outside)};
}

// Linear label direction of norm signal_scale with a common_signal_fraction
// share of its squared norm inside the shared span.
std::vector<double> label_direction(const SyntheticSpec& spec,
                                    const std::vector<std::vector<double>>& shared_basis,
                                    RandomEngine& rng) {
  const auto [inside, outside] = split_by_span(random_unit_vector(spec.latent_dim, rng), shared_basis);
  const double n_in = norm(inside);
  const double n_out = norm(outside);
  double f = spec.common_signal_fraction;
  if (n_out < 1e-9) f = 1.0;
  if (n_in < 1e-9) f = 0.0;
  std::vector<double> direction(spec.latent_dim, 0.0);
  for (std::size_t k = 0; k < spec.latent_dim; ++k) {
    if (f > 0.0) direction[k] += std::sqrt(f) * inside[k] / n_in;
    if (f < 1.0) direction[k] += std::sqrt(1.0 - f) * outside[k] / n_out;
    direction[k] *= spec.signal_scale;
  }
  return direction;
}

// Unit vector orthogonal to the shared span (any unit vector when the span
// is the whole latent space).
std::vector<double> unique_projection(const SyntheticSpec& spec,
                                      const std::vector<std::vector<double>>& shared_basis,
                                      RandomEngine& rng) {
  std::vector<double> g = random_unit_vector(spec.latent_dim, rng);
  std::vector<double> outside = split_by_span(g, shared_basis).second;
  const double n = norm(outside);
  if (n < 1e-9) return g;
  for (double& x : outside) x /= n;
  return outside;
}

std::string level_name(std::size_t level) { return "level" + std::to_string(level + 1); }

// Draws one client: latent rows, labels with a bisection-tuned intercept so
// that the empirical prevalence hits the target, then the feature views.
Dataset generate_client(const SyntheticSpec& spec, const std::vector<double>& direction,
                        const std::vector<LatentView>& views, std::size_t n, RandomEngine& rng) {
  // The first n_common views are the shared ones; their noise-free scores
  // carry the pairwise interaction term.
  const std::size_t pairs = spec.n_common / 2;
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix latent(n, spec.latent_dim);
  for (double& v : latent.data()) v = normal(rng);
  std::vector<double> score(n);
  std::vector<double> uniforms(n);
  for (std::size_t i = 0; i < n; ++i) {
    score[i] = dot(latent.row(i), direction);
    if (pairs > 0 && spec.interaction_scale > 0.0) {
      double q = 0.0;
      for (std::size_t p = 0; p < pairs; ++p) {
        q += dot(latent.row(i), views[2 * p].projection) *
             dot(latent.row(i), views[2 * p + 1].projection);
      }
      score[i] += spec.interaction_scale * q / std::sqrt(static_cast<double>(pairs));
    }
    uniforms[i] = uniform01(rng);
  }

  const auto positives_at = [&](double intercept) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += uniforms[i] < sigmoid(score[i] + intercept);
    return count;
  };
  const auto target =
      static_cast<std::size_t>(std::floor(spec.prevalence_target * static_cast<double>(n) + 0.5));
  double lo = -50.0;
  double hi = 50.0;
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (positives_at(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double intercept = hi;
  const double prevalence = static_cast<double>(positives_at(intercept)) / static_cast<double>(n);
  if (std::abs(prevalence - spec.prevalence_target) > 0.01) {
    throw GenerationError("intercept bisection reached prevalence " + std::to_string(prevalence) +
                          ", target " + std::to_string(spec.prevalence_target));
  }

  std::vector<Feature> features;
  for (const auto& view : views) {
    Feature f;
    f.name = view.name;
    if (view.levels > 0) {
      f.kind = FeatureKind::kCategorical;
      for (std::size_t l = 0; l < view.levels; ++l) f.categories.push_back(level_name(l));
    }
    features.push_back(std::move(f));
  }

  Dataset ds;
  ds.schema = FeatureSchema(std::move(features));
  ds.rows.resize(n);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = uniforms[i] < sigmoid(score[i] + intercept) ? 1 : 0;
    auto& row = ds.rows[i];
    row.reserve(views.size());
    for (const auto& view : views) {
      const double value =
          dot(latent.row(i), view.projection) + view.noise_sd * normal(rng);
      if (view.levels == 0) {
        row.emplace_back(value);
        continue;
      }
      // Equal-width ordinal bins over +-1.5 SD of the view.
      const double view_sd = std::sqrt(1.0 + view.noise_sd * view.noise_sd);
      const double width = 3.0 / static_cast<double>(view.levels);
      std::size_t level = 0;
      while (level + 1 < view.levels &&
             value > view_sd * (-1.5 + width * static_cast<double>(level + 1))) {
        ++level;
      }
      row.emplace_back(level_name(level));
    }
  }
  return ds;
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kNumeric ? "numeric" : "categorical";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "numeric") return FeatureKind::kNumeric;
  if (name == "categorical") return FeatureKind::kCategorical;
  throw DataError("unknown feature kind '" + std::string(name) + "'");
}

FeatureSchema::FeatureSchema(std::vector<Feature> features) : features_(std::move(features)) {
  std::set<std::string> seen;
  for (const auto& f : features_) {
    if (f.name.empty()) throw DataError("feature with an empty name");
    if (!seen.insert(f.name).second) throw DataError("duplicate feature '" + f.name + "'");
    if (f.kind == FeatureKind::kCategorical) {
      if (f.categories.empty()) {
        throw DataError("categorical feature '" + f.name + "' lists no categories");
      }
      std::set<std::string> cats(f.categories.begin(), f.categories.end());
      if (cats.size() != f.categories.size()) {
        throw DataError("categorical feature '" + f.name + "' repeats a category");
      }
    } else if (!f.categories.empty()) {
      throw DataError("numeric feature '" + f.name + "' lists categories");
    }
  }
}

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

const Feature& FeatureSchema::at(std::string_view name) const {
  const auto idx = find(name);
  if (!idx) throw DataError("no feature named '" + std::string(name) + "'");
  return features_[*idx];
}

std::vector<std::string> FeatureSchema::names() const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto& f : features_) out.push_back(f.name);
  return out;
}

FeatureSchema FeatureSchema::select(std::span<const std::string> names) const {
  std::vector<Feature> out;
  out.reserve(names.size());
  for (const auto& name : names) out.push_back(at(name));
  return FeatureSchema(std::move(out));
}

ClassCounts Dataset::class_counts() const {
  ClassCounts counts;
  for (int y : labels) (y == 1 ? counts.positives : counts.negatives) += 1;
  return counts;
}

void Dataset::validate() const {
  if (labels.size() != rows.size()) throw DataError("label count differs from row count");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size()) {
      throw DataError("row " + std::to_string(r) + " width differs from the schema");
    }
    if (labels[r] != 0 && labels[r] != 1) {
      throw DataError("row " + std::to_string(r) + " label is not 0/1");
    }
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const auto& cell = rows[r][c];
      const bool ok = is_unknown(cell) ||
                      (schema.features()[c].kind == FeatureKind::kNumeric
                           ? std::holds_alternative<double>(cell)
                           : std::holds_alternative<std::string>(cell));
      if (!ok) {
        throw DataError("row " + std::to_string(r) + " feature '" + schema.features()[c].name +
                        "' holds a value of the wrong kind");
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.schema = schema;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= rows.size()) throw ShapeError("subset index out of range");
    out.rows.push_back(rows[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::project(std::span<const std::string> names) const {
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& name : names) {
    const auto idx = schema.find(name);
    if (!idx) throw DataError("cannot project onto missing feature '" + name + "'");
    cols.push_back(*idx);
  }
  Dataset out;
  out.schema = schema.select(names);
  out.labels = labels;
  out.rows.reserve(rows.size());
  for (const auto& row : rows) {
    std::vector<Cell> projected;
    projected.reserve(cols.size());
    for (std::size_t c : cols) projected.push_back(row[c]);
    out.rows.push_back(std::move(projected));
  }
  return out;
}

std::size_t stratified_train_count(std::size_t class_size, double train_frac) {
  if (class_size == 0) return 0;
  if (class_size == 1) return 1;
  auto count = static_cast<std::size_t>(
      std::floor(train_frac * static_cast<double>(class_size) + 0.5));
  return std::clamp<std::size_t>(count, 1, class_size - 1);
}

SplitResult stratified_split(const Dataset& ds, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  }
  if (ds.labels.size() != ds.rows.size()) throw DataError("label count differs from row count");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i] == 1].push_back(i);
  if (by_class[0].empty() || by_class[1].empty()) {
    throw StratificationError("stratified split needs both classes; one class has 0 rows");
  }

  RandomEngine rng(seed);
  SplitResult result;
  for (auto& members : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[static_cast<std::size_t>(rng() % i)]);
    }
    const std::size_t n_train = stratified_train_count(members.size(), train_frac);
    result.train_indices.insert(result.train_indices.end(), members.begin(),
                                members.begin() + static_cast<std::ptrdiff_t>(n_train));
    result.test_indices.insert(result.test_indices.end(),
                               members.begin() + static_cast<std::ptrdiff_t>(n_train),
                               members.end());
  }
  std::sort(result.train_indices.begin(), result.train_indices.end());
  std::sort(result.test_indices.begin(), result.test_indices.end());
  result.train = ds.subset(result.train_indices);
  result.test = ds.subset(result.test_indices);
  return result;
}

Encoder::Encoder(FeatureSchema schema, std::map<std::string, NumericStats> stats)
    : schema_(std::move(schema)), stats_(std::move(stats)) {
  for (const auto& f : schema_.features()) {
    const std::size_t width =
        f.kind == FeatureKind::kNumeric ? 2 : f.categories.size();
    if (f.kind == FeatureKind::kNumeric) {
      const auto it = stats_.find(f.name);
      if (it == stats_.end()) {
        throw ConfigError("no standardization statistics for '" + f.name + "'");
      }
      if (!(it->second.sd > 0.0) || !std::isfinite(it->second.mean)) {
        throw ConfigError("invalid standardization statistics for '" + f.name + "'");
      }
    }
    ranges_.push_back({width_, width});
    width_ += width;
  }
}

Encoder Encoder::fit(const Dataset& train) {
  std::map<std::string, NumericStats> stats;
  for (std::size_t c = 0; c < train.schema.size(); ++c) {
    const auto& f = train.schema.features()[c];
    if (f.kind != FeatureKind::kNumeric) continue;
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& row : train.rows) {
      if (const double* v = std::get_if<double>(&row[c])) {
        sum += *v;
        ++count;
      }
    }
    NumericStats s;
    if (count > 0) {
      s.mean = sum / static_cast<double>(count);
      double sq = 0.0;
      for (const auto& row : train.rows) {
        if (const double* v = std::get_if<double>(&row[c])) sq += (*v - s.mean) * (*v - s.mean);
      }
      const double sd = std::sqrt(sq / static_cast<double>(count));
      s.sd = sd > 0.0 ? sd : 1.0;
    }
    stats[f.name] = s;
  }
  return Encoder(train.schema, std::move(stats));
}

std::vector<std::string> encoded_column_names(const FeatureSchema& schema) {
  std::vector<std::string> names;
  for (const auto& f : schema.features()) {
    if (f.kind == FeatureKind::kNumeric) {
      names.push_back(f.name);
      names.push_back(f.name + ":present");
    } else {
      for (const auto& cat : f.categories) names.push_back(f.name + "=" + cat);
    }
  }
  return names;
}

std::vector<std::string> Encoder::column_names() const { return encoded_column_names(schema_); }

EncodedMatrix Encoder::encode(const Dataset& ds) const {
  if (!(ds.schema == schema_)) throw EncodingError("dataset schema differs from the encoder's");
  if (ds.labels.size() != ds.rows.size()) throw EncodingError("label count differs from row count");
  EncodedMatrix out;
  out.x = Matrix(ds.size(), width_);
  out.labels = ds.labels;
  out.column_names = column_names();
  for (std::size_t c = 0; c < schema_.size(); ++c) {
    out.column_map.emplace_back(schema_.features()[c].name, ranges_[c]);
  }

  for (std::size_t r = 0; r < ds.size(); ++r) {
    const auto& row = ds.rows[r];
    if (row.size() != schema_.size()) throw EncodingError("row width differs from the schema");
    auto dst = out.x.row(r);
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      const auto& f = schema_.features()[c];
      const auto& cell = row[c];
      const std::size_t offset = ranges_[c].offset;
      if (is_unknown(cell)) continue;
      if (f.kind == FeatureKind::kNumeric) {
        const double* v = std::get_if<double>(&cell);
        if (v == nullptr) {
          throw EncodingError("feature '" + f.name + "' expects a number, got '" +
                              std::get<std::string>(cell) + "'");
        }
        const NumericStats& s = stats_.at(f.name);
        dst[offset] = (*v - s.mean) / s.sd;
        dst[offset + 1] = 1.0;
      } else {
        const std::string* v = std::get_if<std::string>(&cell);
        if (v == nullptr) {
          throw EncodingError("feature '" + f.name + "' expects a category, got " +
                              format_double(std::get<double>(cell)));
        }
        const auto it = std::find(f.categories.begin(), f.categories.end(), *v);
        if (it == f.categories.end()) {
          throw EncodingError("feature '" + f.name + "' has out-of-vocabulary value '" + *v + "'");
        }
        dst[offset + static_cast<std::size_t>(it - f.categories.begin())] = 1.0;
      }
    }
  }
  return out;
}

std::vector<std::vector<Cell>> Encoder::decode(const Matrix& x) const {
  if (x.cols() != width_) throw ShapeError("encoded width differs from the encoder's");
  std::vector<std::vector<Cell>> rows(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r);
    auto& row = rows[r];
    for (std::size_t c = 0; c < schema_.size(); ++c) {
      const auto& f = schema_.features()[c];
      const std::size_t offset = ranges_[c].offset;
      if (f.kind == FeatureKind::kNumeric) {
        if (src[offset + 1] > 0.5) {
          const NumericStats& s = stats_.at(f.name);
          row.emplace_back(src[offset] * s.sd + s.mean);
        } else {
          row.emplace_back(kUnknown);
        }
        continue;
      }
      Cell cell = kUnknown;
      for (std::size_t k = 0; k < f.categories.size(); ++k) {
        if (src[offset + k] > 0.5) {
          cell = f.categories[k];
          break;
        }
      }
      row.push_back(std::move(cell));
    }
  }
  return rows;
}

void SyntheticSpec::validate() const {
  if (latent_dim == 0) throw ConfigError("latent_dim must be positive");
  if (n_small == 0 || n_large == 0) throw ConfigError("client sizes must be positive");
  if (n_common == 0) throw ConfigError("n_common must be at least 1");
  if (!(prevalence_target > 0.0 && prevalence_target < 0.5)) {
    throw ConfigError("prevalence_target must lie in (0, 0.5)");
  }
  if (!(noise_sd >= 0.0) || !(small_unique_noise_factor >= 0.0) ||
      !(large_unique_noise_factor >= 0.0)) {
    throw ConfigError("noise parameters must be nonnegative");
  }
  if (!(signal_scale > 0.0)) throw ConfigError("signal_scale must be positive");
  if (!(interaction_scale >= 0.0)) throw ConfigError("interaction_scale must be nonnegative");
  if (!(common_signal_fraction >= 0.0 && common_signal_fraction <= 1.0)) {
    throw ConfigError("common_signal_fraction must lie in [0, 1]");
  }
  if (categorical_levels == 1) throw ConfigError("categorical_levels must be 0 or >= 2");
  if (identity_common_projection && n_common > latent_dim) {
    throw ConfigError("identity projections need n_common <= latent_dim");
  }
}

SyntheticClients generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  RandomEngine rng(spec.seed);

  std::vector<LatentView> common;
  for (std::size_t j = 0; j < spec.n_common; ++j) {
    LatentView view;
    view.name = "common_" + std::to_string(j + 1);
    if (spec.identity_common_projection) {
      view.projection.assign(spec.latent_dim, 0.0);
      view.projection[j] = 1.0;
    } else {
      view.projection = random_unit_vector(spec.latent_dim, rng);
    }
    view.noise_sd = spec.noise_sd;
    common.push_back(std::move(view));
  }
  if (spec.categorical_levels >= 2) common.back().levels = spec.categorical_levels;

  const std::vector<std::vector<double>> shared_basis = span_basis(common);
  const std::vector<double> direction = label_direction(spec, shared_basis, rng);

  const auto unique_views = [&](std::string_view prefix, std::size_t count, double factor) {
    std::vector<LatentView> views;
    for (std::size_t j = 0; j < count; ++j) {
      LatentView view;
      view.name = std::string(prefix) + std::to_string(j + 1);
      view.projection = unique_projection(spec, shared_basis, rng);
      view.noise_sd = spec.noise_sd * factor;
      views.push_back(std::move(view));
    }
    return views;
  };
  std::vector<LatentView> small_views = common;
  for (auto& v : unique_views("small_unique_", spec.n_unique_small, spec.small_unique_noise_factor)) {
    small_views.push_back(std::move(v));
  }
  std::vector<LatentView> large_views = common;
  for (auto& v : unique_views("large_unique_", spec.n_unique_large, spec.large_unique_noise_factor)) {
    large_views.push_back(std::move(v));
  }

  SyntheticClients clients;
  clients.small = generate_client(spec, direction, small_views, spec.n_small, rng);
  clients.large = generate_client(spec, direction, large_views, spec.n_large, rng);
  return clients;
}

SchemaFile parse_schema_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("label") || !j.contains("features") ||
      !j["label"].is_string() || !j["features"].is_array()) {
    throw IngestionError("schema must be an object with a string 'label' and a 'features' array");
  }
  SchemaFile out;
  out.label = j["label"].get<std::string>();
  std::vector<Feature> features;
  try {
    for (const auto& jf : j["features"]) {
      Feature f;
      f.name = jf.at("name").get<std::string>();
      f.kind = feature_kind_from_string(jf.at("kind").get<std::string>());
      if (jf.contains("categories")) f.categories = jf["categories"].get<std::vector<std::string>>();
      features.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("malformed feature entry: ") + e.what());
  }
  out.schema = FeatureSchema(std::move(features));
  if (out.schema.find(out.label)) throw IngestionError("label column is also declared as a feature");
  return out;
}

SchemaFile load_schema_file(const std::filesystem::path& path) {
  return parse_schema_json(read_file(path));
}

std::string schema_to_json(const SchemaFile& schema) {
  nlohmann::json j;
  j["label"] = schema.label;
  j["features"] = nlohmann::json::array();
  for (const auto& f : schema.schema.features()) {
    nlohmann::json jf;
    jf["name"] = f.name;
    jf["kind"] = std::string(to_string(f.kind));
    if (f.kind == FeatureKind::kCategorical) jf["categories"] = f.categories;
    j["features"].push_back(std::move(jf));
  }
  return j.dump(2) + "\n";
}

Dataset parse_csv(std::string_view csv_text, const SchemaFile& schema) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= csv_text.size()) {
    std::size_t end = csv_text.find('\n', start);
    if (end == std::string_view::npos) end = csv_text.size();
    std::string_view line = csv_text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw IngestionError("CSV has no header row");

  const std::vector<std::string> header = split_line(lines.front());
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!position.emplace(header[i], i).second) {
      throw IngestionError("duplicate column '" + header[i] + "' in header");
    }
  }
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.schema.features()) {
    const auto it = position.find(f.name);
    if (it == position.end()) throw IngestionError("missing column '" + f.name + "'");
    feature_cols.push_back(it->second);
  }
  const auto label_it = position.find(schema.label);
  if (label_it == position.end()) throw IngestionError("missing label column '" + schema.label + "'");
  for (const auto& name : header) {
    if (name != schema.label && !schema.schema.find(name)) {
      throw IngestionError("column '" + name + "' is not declared in the schema");
    }
  }

  Dataset ds;
  ds.schema = schema.schema;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row_number = li;
    const std::vector<std::string> cells = split_line(lines[li]);
    if (cells.size() != header.size()) {
      throw IngestionError(row_number, "expected " + std::to_string(header.size()) +
                                           " cells, found " + std::to_string(cells.size()));
    }
    std::vector<Cell> row;
    row.reserve(feature_cols.size());
    for (std::size_t c = 0; c < feature_cols.size(); ++c) {
      const auto& f = schema.schema.features()[c];
      const std::string& text = cells[feature_cols[c]];
      if (text.empty() || text == kUnknownToken) {
        row.emplace_back(kUnknown);
      } else if (f.kind == FeatureKind::kNumeric) {
        const auto value = parse_double(text);
        if (!value) {
          throw IngestionError(row_number,
                               "feature '" + f.name + "' has unparseable number '" + text + "'");
        }
        row.emplace_back(*value);
      } else {
        row.emplace_back(text);
      }
    }
    const std::string& label = cells[label_it->second];
    if (label != "0" && label != "1") {
      throw IngestionError(row_number, "label '" + label + "' is not 0 or 1");
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label == "1" ? 1 : 0);
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path) {
  const SchemaFile schema = load_schema_file(schema_path);
  return parse_csv(read_file(csv_path), schema);
}

std::string to_csv(const Dataset& ds, std::string_view label_name) {
  std::string out;
  for (const auto& f : ds.schema.features()) {
    out += f.name;
    out += ',';
  }
  out += label_name;
  out += '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (const auto& cell : ds.rows[r]) {
      if (const double* v = std::get_if<double>(&cell)) {
        out += format_double(*v);
      } else if (const std::string* s = std::get_if<std::string>(&cell)) {
        out += *s;
      }
      out += ',';
    }
    out += ds.labels[r] == 1 ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace lf2l::data
