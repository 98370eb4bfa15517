#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dml/autodiff.hpp"
#include "dml/task.hpp"

namespace dml {

enum class DatasetKind { movielens, electronics, synthetic };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

/// One raw (user, item) interaction. rating is 1..5, or 0 for a sampled negative.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  int rating = 0;
  std::int64_t timestamp = 0;
};

/// Raw interactions plus side-feature lookups keyed by user and item id.
/// User features hold one value per feature; item features hold a bag each
/// (e.g. a movie's genres).
struct RecordSet {
  std::vector<InteractionRecord> records;
  std::vector<std::string> user_feature_names;
  std::vector<std::string> item_feature_names;
  std::unordered_map<std::string, std::vector<std::string>> user_features;
  std::unordered_map<std::string, std::vector<std::vector<std::string>>> item_features;
  std::size_t malformed_lines = 0;
};

/// Reads ratings.dat, users.dat and movies.dat ("::"-delimited). Malformed
/// lines are counted and skipped; more than 1% malformed in any file, or a
/// missing file, throws DataError.
RecordSet parse_movielens(const std::filesystem::path& ratings, const std::filesystem::path& users,
                          const std::filesystem::path& movies);

/// Generic "user<d>item<d>rating[<d>timestamp]" text. A non-numeric rating on
/// the first line is treated as a header.
RecordSet parse_interactions(const std::filesystem::path& path, char delimiter);

/// Optional "item<d>category" file; attaches a single-valued category feature.
void attach_item_categories(RecordSet& set, const std::filesystem::path& path, char delimiter);

/// Splits "a::b::c" style lines on a multi-character delimiter.
std::vector<std::string_view> split_fields(std::string_view line, std::string_view delimiter);

struct AugmentStats {
  std::size_t negatives_added = 0;
  std::size_t exhausted_users = 0;
};

/// For every user with n distinct rated items, adds n distinct items the user
/// never rated (rating 0), drawn uniformly from the item vocabulary. Users
/// with fewer than n unrated items get all of them and are counted in stats.
RecordSet augment_negatives(const RecordSet& set, std::uint64_t seed, AugmentStats* stats = nullptr);

struct FieldInfo {
  std::string name;
  std::size_t vocab_size = 0;  // index 0 is the unknown bucket
  bool multi_valued = false;
};

/// Materialized view of one example.
struct LabeledExample {
  std::vector<std::vector<std::int32_t>> features;  // per field
  std::vector<double> labels;                       // per task
  int rating = 0;
};

/// Encoded examples, stored column-wise.
class Dataset {
 public:
  Dataset() = default;
  Dataset(DatasetKind kind, std::vector<FieldInfo> fields, std::vector<TaskSpec> tasks);

  DatasetKind kind() const { return kind_; }
  const std::vector<FieldInfo>& fields() const { return fields_; }
  std::vector<FieldInfo>& fields() { return fields_; }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }
  std::size_t size() const { return ratings_.size(); }

  void append(const LabeledExample& example);
  LabeledExample example(std::size_t i) const;

  std::span<const std::int32_t> feature(std::size_t field, std::size_t i) const;
  double label(std::size_t task, std::size_t i) const { return labels_[task][i]; }
  int rating(std::size_t i) const { return ratings_[i]; }
  const std::vector<double>& labels(std::size_t task) const { return labels_[task]; }

 private:
  DatasetKind kind_ = DatasetKind::synthetic;
  std::vector<FieldInfo> fields_;
  std::vector<TaskSpec> tasks_;
  std::vector<IndexBags> columns_;
  std::vector<std::vector<double>> labels_;
  std::vector<int> ratings_;
};

/// Encodes features and derives task labels.
///   movielens:   (positive = rating >= 4, rating)
///   electronics: (rated = rating > 0, positive = rating >= 4)
/// Vocabularies are built over all records in first-appearance order.
Dataset derive_labels(const RecordSet& set, DatasetKind kind);

inline constexpr int kPositiveRatingThreshold = 4;

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

/// Uniform random 8:1:1 assignment; validation and test each get round(n/10).
DatasetSplit split_dataset(std::size_t num_examples, std::uint64_t seed);

/// Keeps a deterministic fraction of examples (for desk-scale runs).
std::vector<std::size_t> subsample_indices(std::size_t num_examples, double fraction,
                                           std::uint64_t seed);
Dataset select_examples(const Dataset& data, std::span<const std::size_t> rows);

struct Batch {
  std::size_t size = 0;
  std::vector<std::shared_ptr<const IndexBags>> fields;
  std::vector<Tensor> labels;  // per task, [size x 1]
  std::vector<int> ratings;
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows);

/// Shuffled order of a split part for one epoch, keyed by (seed, epoch).
std::vector<std::size_t> epoch_order(std::span<const std::size_t> part, std::uint64_t seed,
                                     std::size_t epoch);

/// Streams batches over a split part; the final short batch is emitted.
class BatchIterator {
 public:
  BatchIterator(const Dataset& data, std::vector<std::size_t> part, std::size_t batch_size,
                std::uint64_t seed);

  /// Reshuffles for the given epoch and rewinds.
  void start_epoch(std::size_t epoch);
  /// Unshuffled pass, for evaluation.
  void start_sequential();
  std::optional<Batch> next();
  std::size_t num_batches() const;

 private:
  const Dataset& data_;
  std::vector<std::size_t> part_;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t cursor_ = 0;
};

/// Synthetic data with labels driven by a known linear score over
/// categorical fields; used for tests and smoke runs.
struct SyntheticSpec {
  std::size_t num_examples = 1000;
  std::size_t num_users = 60;
  std::size_t num_items = 40;
  std::size_t num_side_values = 6;
  std::uint64_t seed = 7;
};

Dataset make_synthetic(const SyntheticSpec& spec);

// Processed-split cache: versioned text holding the encoded dataset, the
// split and its seed, plus an FNV-1a hash of the body checked on load.
inline constexpr int kSplitCacheVersion = 1;

void write_split_cache(std::ostream& out, const Dataset& data, const DatasetSplit& split);
std::pair<Dataset, DatasetSplit> read_split_cache(std::istream& in);
void save_split_cache(const std::filesystem::path& path, const Dataset& data,
                      const DatasetSplit& split);
std::pair<Dataset, DatasetSplit> load_split_cache(const std::filesystem::path& path);

}  // namespace dml
