// Copyright 2026 The LF2L Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Tabular data for the federated experiments: feature schemas, raw datasets
// with an explicit UNKNOWN cell, stratified splitting, one-hot/standardized
// encoding, CSV ingestion and a seeded two-client synthetic generator.

#ifndef LF2L_DATASETS_HPP_
#define LF2L_DATASETS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lf2l/matrix.hpp"

namespace lf2l::data {

enum class FeatureKind { kNumeric, kCategorical };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view name);

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  std::vector<std::string> categories;  // categorical only; order defines encoding

  bool operator==(const Feature&) const = default;
};

// Ordered list of feature descriptors with unique names.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<Feature> features);

  const std::vector<Feature>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  std::optional<std::size_t> find(std::string_view name) const;
  const Feature& at(std::string_view name) const;
  std::vector<std::string> names() const;

  // Sub-schema with the named features in the given order.
  FeatureSchema select(std::span<const std::string> names) const;

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<Feature> features_;
};

struct Unknown {
  bool operator==(const Unknown&) const = default;
};
inline constexpr Unknown kUnknown{};

using Cell = std::variant<Unknown, double, std::string>;

inline bool is_unknown(const Cell& cell) { return std::holds_alternative<Unknown>(cell); }

struct ClassCounts {
  std::size_t negatives = 0;
  std::size_t positives = 0;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<std::vector<Cell>> rows;
  std::vector<int> labels;

  std::size_t size() const { return rows.size(); }
  ClassCounts class_counts() const;
  // Throws DataError if row widths, label count or label values are invalid,
  // or a cell's type disagrees with its feature kind.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // Same rows restricted to (and reordered as) `names`.
  Dataset project(std::span<const std::string> names) const;
};

// ---------------------------------------------------------------------------
// Splitting.

// floor(frac * n + 0.5), nudged so both sides keep a row when n >= 2; a
// singleton class goes to train.
std::size_t stratified_train_count(std::size_t class_size, double train_frac);

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> test_indices;   // ascending
};

SplitResult stratified_split(const Dataset& ds, double train_frac, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Encoding.

struct ColumnRange {
  std::size_t offset = 0;
  std::size_t width = 0;

  bool operator==(const ColumnRange&) const = default;
};

struct NumericStats {
  double mean = 0.0;
  double sd = 1.0;
};

struct EncodedMatrix {
  Matrix x;
  std::vector<int> labels;
  std::vector<std::pair<std::string, ColumnRange>> column_map;  // schema order
  std::vector<std::string> column_names;

  std::size_t rows() const { return x.rows(); }
  std::size_t cols() const { return x.cols(); }
};

// Encoded column names for `schema`: "name" and "name:present" per numeric
// feature, "name=category" per category.
std::vector<std::string> encoded_column_names(const FeatureSchema& schema);

// Numeric features occupy two columns: the standardized value and a presence
// indicator (0 for UNKNOWN, in which case the value column is 0 as well).
// Categorical features are one-hot over the schema's category list; UNKNOWN
// encodes as the all-zero group.
class Encoder {
 public:
  Encoder(FeatureSchema schema, std::map<std::string, NumericStats> stats);

  // Standardization statistics from the known cells of `train` (population
  // SD; an SD of 0 is replaced by 1).
  static Encoder fit(const Dataset& train);

  EncodedMatrix encode(const Dataset& ds) const;
  std::vector<std::vector<Cell>> decode(const Matrix& x) const;

  const FeatureSchema& schema() const { return schema_; }
  const std::map<std::string, NumericStats>& stats() const { return stats_; }
  std::size_t width() const { return width_; }
  std::vector<std::string> column_names() const;

 private:
  FeatureSchema schema_;
  std::map<std::string, NumericStats> stats_;
  std::vector<ColumnRange> ranges_;
  std::size_t width_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic benchmark.

struct SyntheticSpec {
  std::size_t latent_dim = 12;
  std::size_t n_small = 1000;
  std::size_t n_large = 8000;
  double prevalence_target = 0.08;
  std::size_t n_common = 6;
  std::size_t n_unique_small = 6;
  std::size_t n_unique_large = 2;
  double noise_sd = 1.0;
  // Noise multipliers applied to noise_sd for each client's unique views.
  // Unique views project onto the complement of the shared views' span.
  double small_unique_noise_factor = 0.25;
  double large_unique_noise_factor = 2.0;
  // Norm of the latent label direction (logit scale).
  double signal_scale = 3.0;
  // Share of the linear label signal (squared norm) lying in the span of the
  // shared views.
  double common_signal_fraction = 0.5;
  // Weight of the pairwise products of the shared views' noise-free scores
  // added to the label logit.
  double interaction_scale = 2.0;
  // Number of ordinal levels of the last common feature, emitted as a
  // categorical column; 0 keeps every feature numeric.
  std::size_t categorical_levels = 4;
  // Common views use the first n_common unit vectors instead of random
  // directions (requires n_common <= latent_dim).
  bool identity_common_projection = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticClients {
  Dataset small;
  Dataset large;
};

SyntheticClients generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Files.

struct SchemaFile {
  std::string label;
  FeatureSchema schema;
};

SchemaFile parse_schema_json(std::string_view json_text);
SchemaFile load_schema_file(const std::filesystem::path& path);
std::string schema_to_json(const SchemaFile& schema);

Dataset load_csv(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path);
Dataset parse_csv(std::string_view csv_text, const SchemaFile& schema);
std::string to_csv(const Dataset& ds, std::string_view label_name);

}  // namespace lf2l::data

#endif  // LF2L_DATASETS_HPP_
