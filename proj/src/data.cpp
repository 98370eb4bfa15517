#include "dml/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "dml/error.hpp"
#include "dml/random.hpp"

namespace dml {

namespace {

constexpr double kMaxMalformedFraction = 0.01;

template <class T>
bool parse_number(std::string_view text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

void check_malformed(const std::filesystem::path& path, std::size_t bad, std::size_t total) {
  if (total == 0) throw DataError(path.string() + ": no data lines");
  if (static_cast<double>(bad) > kMaxMalformedFraction * static_cast<double>(total)) {
    throw DataError(path.string() + ": " + std::to_string(bad) + " of " + std::to_string(total) +
                    " lines malformed (limit 1%)");
  }
}

// Index 0 is the unknown bucket; ids are assigned in first-appearance order.
class Vocabulary {
 public:
  std::int32_t add(const std::string& key) {
    auto [it, inserted] = ids_.try_emplace(key, static_cast<std::int32_t>(ids_.size() + 1));
    return it->second;
  }
  std::size_t size() const { return ids_.size() + 1; }

 private:
  std::unordered_map<std::string, std::int32_t> ids_;
};

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::movielens: return "ml1m";
    case DatasetKind::electronics: return "electronics";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "ml1m" || name == "movielens") return DatasetKind::movielens;
  if (name == "electronics" || name == "amazon") return DatasetKind::electronics;
  if (name == "synthetic") return DatasetKind::synthetic;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

std::vector<std::string_view> split_fields(std::string_view line, std::string_view delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + delimiter.size();
  }
}

RecordSet parse_movielens(const std::filesystem::path& ratings, const std::filesystem::path& users,
                          const std::filesystem::path& movies) {
  RecordSet set;
  set.user_feature_names = {"gender", "age", "occupation"};
  set.item_feature_names = {"genres"};

  std::string line;
  {
    auto in = open_or_throw(users);
    std::size_t total = 0, bad = 0;
    while (std::getline(in, line)) {
      const auto text = trim(line);
      if (text.empty()) continue;
      ++total;
      const auto f = split_fields(text, "::");
      if (f.size() != 5 || f[0].empty()) {
        ++bad;
        continue;
      }
      set.user_features[std::string(f[0])] = {std::string(f[1]), std::string(f[2]), std::string(f[3])};
    }
    check_malformed(users, bad, total);
    set.malformed_lines += bad;
  }
  {
    auto in = open_or_throw(movies);
    std::size_t total = 0, bad = 0;
    while (std::getline(in, line)) {
      const auto text = trim(line);
      if (text.empty()) continue;
      ++total;
      const auto f = split_fields(text, "::");
      if (f.size() != 3 || f[0].empty()) {
        ++bad;
        continue;
      }
      std::vector<std::string> genres;
      if (!f[2].empty()) {
        for (auto g : split_fields(f[2], "|")) genres.emplace_back(g);
      }
      set.item_features[std::string(f[0])] = {std::move(genres)};
    }
    check_malformed(movies, bad, total);
    set.malformed_lines += bad;
  }
  {
    auto in = open_or_throw(ratings);
    std::size_t total = 0, bad = 0;
    while (std::getline(in, line)) {
      const auto text = trim(line);
      if (text.empty()) continue;
      ++total;
      const auto f = split_fields(text, "::");
      InteractionRecord rec;
      if (f.size() != 4 || f[0].empty() || f[1].empty() || !parse_number(f[2], rec.rating) ||
          rec.rating < 1 || rec.rating > 5 || !parse_number(f[3], rec.timestamp)) {
        ++bad;
        continue;
      }
      rec.user_id = std::string(f[0]);
      rec.item_id = std::string(f[1]);
      set.records.push_back(std::move(rec));
    }
    check_malformed(ratings, bad, total);
    set.malformed_lines += bad;
  }
  return set;
}

RecordSet parse_interactions(const std::filesystem::path& path, char delimiter) {
  RecordSet set;
  auto in = open_or_throw(path);
  std::string line;
  std::size_t total = 0, bad = 0;
  bool first = true;
  const std::string delim(1, delimiter);
  while (std::getline(in, line)) {
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto f = split_fields(text, delim);
    InteractionRecord rec;
    const bool ok = (f.size() == 3 || f.size() == 4) && !f[0].empty() && !f[1].empty();
    double rating = 0.0;
    const bool rating_ok = ok && parse_number(f[2], rating);
    if (first && ok && !rating_ok) {
      first = false;  // header
      continue;
    }
    first = false;
    ++total;
    if (!rating_ok || rating < 1.0 || rating > 5.0 || rating != std::floor(rating) ||
        (f.size() == 4 && !parse_number(f[3], rec.timestamp))) {
      ++bad;
      continue;
    }
    rec.user_id = std::string(f[0]);
    rec.item_id = std::string(f[1]);
    rec.rating = static_cast<int>(rating);
    set.records.push_back(std::move(rec));
  }
  check_malformed(path, bad, total);
  set.malformed_lines = bad;
  return set;
}

void attach_item_categories(RecordSet& set, const std::filesystem::path& path, char delimiter) {
  auto in = open_or_throw(path);
  std::string line;
  const std::string delim(1, delimiter);
  std::size_t total = 0, bad = 0;
  set.item_feature_names.push_back("category");
  const std::size_t slot = set.item_feature_names.size() - 1;
  while (std::getline(in, line)) {
    const auto text = trim(line);
    if (text.empty()) continue;
    ++total;
    const auto f = split_fields(text, delim);
    if (f.size() != 2 || f[0].empty()) {
      ++bad;
      continue;
    }
    auto& feats = set.item_features[std::string(f[0])];
    feats.resize(slot + 1);
    feats[slot] = {std::string(f[1])};
  }
  check_malformed(path, bad, total);
}

RecordSet augment_negatives(const RecordSet& set, std::uint64_t seed, AugmentStats* stats) {
  std::vector<std::string> items;
  std::unordered_map<std::string, std::size_t> item_index;
  std::vector<std::string> users;
  std::unordered_map<std::string, std::vector<std::size_t>> rated;
  for (const auto& rec : set.records) {
    auto [it, inserted] = item_index.try_emplace(rec.item_id, items.size());
    if (inserted) items.push_back(rec.item_id);
    auto [ut, new_user] = rated.try_emplace(rec.user_id);
    if (new_user) users.push_back(rec.user_id);
    ut->second.push_back(it->second);
  }

  RecordSet out = set;
  AugmentStats local;
  Rng rng(seed);
  for (const auto& user : users) {
    auto& seen = rated[user];
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    const std::size_t wanted = seen.size();
    const std::size_t available = items.size() - seen.size();
    const std::size_t take = std::min(wanted, available);
    if (take < wanted) {
      ++local.exhausted_users;
      std::clog << "warning: user " << user << " has only " << available
                << " unrated items; sampling all of them\n";
    }

    std::vector<std::size_t> chosen;
    if (take * 2 <= available) {
      std::unordered_set<std::size_t> picked;
      while (chosen.size() < take) {
        const std::size_t cand = rng.below(items.size());
        if (std::binary_search(seen.begin(), seen.end(), cand) || !picked.insert(cand).second) continue;
        chosen.push_back(cand);
      }
    } else {
      std::vector<std::size_t> pool;
      pool.reserve(available);
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (!std::binary_search(seen.begin(), seen.end(), i)) pool.push_back(i);
      }
      // Partial Fisher-Yates: the first `take` slots are a uniform sample.
      for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    }
    for (std::size_t idx : chosen) out.records.push_back(InteractionRecord{user, items[idx], 0, 0});
    local.negatives_added += chosen.size();
  }
  if (stats) *stats = local;
  return out;
}

Dataset::Dataset(DatasetKind kind, std::vector<FieldInfo> fields, std::vector<TaskSpec> tasks)
    : kind_(kind), fields_(std::move(fields)), tasks_(std::move(tasks)),
      columns_(fields_.size()), labels_(tasks_.size()) {}

void Dataset::append(const LabeledExample& example) {
  if (example.features.size() != fields_.size() || example.labels.size() != tasks_.size()) {
    throw DataError("dataset: example has " + std::to_string(example.features.size()) +
                    " fields and " + std::to_string(example.labels.size()) + " labels");
  }
  for (std::size_t f = 0; f < fields_.size(); ++f) columns_[f].push(example.features[f]);
  for (std::size_t t = 0; t < tasks_.size(); ++t) labels_[t].push_back(example.labels[t]);
  ratings_.push_back(example.rating);
}

LabeledExample Dataset::example(std::size_t i) const {
  LabeledExample ex;
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    const auto bag = feature(f, i);
    ex.features.emplace_back(bag.begin(), bag.end());
  }
  for (std::size_t t = 0; t < tasks_.size(); ++t) ex.labels.push_back(labels_[t][i]);
  ex.rating = ratings_[i];
  return ex;
}

std::span<const std::int32_t> Dataset::feature(std::size_t field, std::size_t i) const {
  return columns_[field].bag(i);
}

Dataset derive_labels(const RecordSet& set, DatasetKind kind) {
  std::vector<TaskSpec> tasks;
  switch (kind) {
    case DatasetKind::movielens:
      tasks = {{"positive", TaskKind::classification}, {"rating", TaskKind::regression}};
      break;
    case DatasetKind::electronics:
      tasks = {{"rated", TaskKind::classification}, {"positive", TaskKind::classification}};
      break;
    default:
      throw ConfigError("derive_labels: unsupported dataset kind '" + std::string(to_string(kind)) + "'");
  }

  const std::size_t n_user = set.user_feature_names.size();
  const std::size_t n_item = set.item_feature_names.size();
  std::vector<Vocabulary> vocab(2 + n_user + n_item);
  std::vector<FieldInfo> fields = {{"user", 0, false}, {"item", 0, false}};
  for (const auto& name : set.user_feature_names) fields.push_back({name, 0, false});
  for (const auto& name : set.item_feature_names) fields.push_back({name, 0, true});

  std::vector<LabeledExample> encoded;
  encoded.reserve(set.records.size());
  for (const auto& rec : set.records) {
    LabeledExample ex;
    ex.features.resize(fields.size());
    ex.features[0] = {vocab[0].add(rec.user_id)};
    ex.features[1] = {vocab[1].add(rec.item_id)};
    auto uf = set.user_features.find(rec.user_id);
    for (std::size_t u = 0; u < n_user; ++u) {
      const std::size_t f = 2 + u;
      if (uf != set.user_features.end() && u < uf->second.size()) {
        ex.features[f] = {vocab[f].add(uf->second[u])};
      } else {
        ex.features[f] = {0};
      }
    }
    auto itf = set.item_features.find(rec.item_id);
    for (std::size_t m = 0; m < n_item; ++m) {
      const std::size_t f = 2 + n_user + m;
      if (itf != set.item_features.end() && m < itf->second.size()) {
        for (const auto& value : itf->second[m]) ex.features[f].push_back(vocab[f].add(value));
      }
      if (ex.features[f].empty()) ex.features[f] = {0};
    }
    const double positive = rec.rating >= kPositiveRatingThreshold ? 1.0 : 0.0;
    if (kind == DatasetKind::movielens) {
      ex.labels = {positive, static_cast<double>(rec.rating)};
    } else {
      ex.labels = {rec.rating > 0 ? 1.0 : 0.0, positive};
    }
    ex.rating = rec.rating;
    encoded.push_back(std::move(ex));
  }
  for (std::size_t f = 0; f < fields.size(); ++f) fields[f].vocab_size = vocab[f].size();

  Dataset data(kind, std::move(fields), std::move(tasks));
  for (const auto& ex : encoded) data.append(ex);
  return data;
}

DatasetSplit split_dataset(std::size_t num_examples, std::uint64_t seed) {
  std::vector<std::size_t> order(num_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const auto tenth = static_cast<std::size_t>(std::llround(static_cast<double>(num_examples) / 10.0));
  const std::size_t n_train = num_examples - 2 * tenth;
  DatasetSplit split;
  split.seed = seed;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + tenth));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + tenth), order.end());
  return split;
}

std::vector<std::size_t> subsample_indices(std::size_t num_examples, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample fraction must lie in (0, 1]");
  std::vector<std::size_t> order(num_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (fraction == 1.0) return order;
  Rng rng(derive_seed(seed, "subsample"));
  rng.shuffle(order);
  order.resize(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(num_examples))));
  std::sort(order.begin(), order.end());
  return order;
}

Dataset select_examples(const Dataset& data, std::span<const std::size_t> rows) {
  Dataset out(data.kind(), data.fields(), data.tasks());
  for (std::size_t r : rows) out.append(data.example(r));
  return out;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows) {
  Batch batch;
  batch.size = rows.size();
  for (std::size_t f = 0; f < data.fields().size(); ++f) {
    auto bags = std::make_shared<IndexBags>();
    bags->offsets.reserve(rows.size() + 1);
    for (std::size_t r : rows) bags->push(data.feature(f, r));
    batch.fields.push_back(std::move(bags));
  }
  for (std::size_t t = 0; t < data.tasks().size(); ++t) {
    Tensor labels(Shape(rows.size(), 1));
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.label(t, rows[i]);
    batch.labels.push_back(std::move(labels));
  }
  batch.ratings.reserve(rows.size());
  for (std::size_t r : rows) batch.ratings.push_back(data.rating(r));
  return batch;
}

std::vector<std::size_t> epoch_order(std::span<const std::size_t> part, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(part.begin(), part.end());
  Rng rng(derive_seed(derive_seed(seed, "epoch"), static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  return order;
}

BatchIterator::BatchIterator(const Dataset& data, std::vector<std::size_t> part,
                             std::size_t batch_size, std::uint64_t seed)
    : data_(data), part_(std::move(part)), batch_size_(batch_size), seed_(seed) {
  if (batch_size_ == 0) throw ConfigError("batch size must be at least 1");
  start_sequential();
}

void BatchIterator::start_epoch(std::size_t epoch) {
  order_ = epoch_order(part_, seed_, epoch);
  cursor_ = 0;
}

void BatchIterator::start_sequential() {
  order_ = part_;
  cursor_ = 0;
}

std::optional<Batch> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t n = std::min(batch_size_, order_.size() - cursor_);
  Batch b = make_batch(data_, std::span(order_).subspan(cursor_, n));
  cursor_ += n;
  return b;
}

std::size_t BatchIterator::num_batches() const {
  return (part_.size() + batch_size_ - 1) / batch_size_;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  auto weights = [&](std::size_t n) {
    std::vector<double> w(n + 1, 0.0);
    for (std::size_t i = 1; i <= n; ++i) w[i] = rng.normal();
    return w;
  };
  const auto w_user = weights(spec.num_users);
  const auto w_item = weights(spec.num_items);
  const auto w_side = weights(spec.num_side_values);
  const auto w_tag = weights(spec.num_side_values);

  std::vector<FieldInfo> fields = {{"user", spec.num_users + 1, false},
                                   {"item", spec.num_items + 1, false},
                                   {"side", spec.num_side_values + 1, false},
                                   {"tags", spec.num_side_values + 1, true}};
  std::vector<TaskSpec> tasks = {{"positive", TaskKind::classification},
                                 {"rating", TaskKind::regression}};
  Dataset data(DatasetKind::synthetic, std::move(fields), std::move(tasks));

  // score = w_user + w_item + w_side + mean(w_tags); the four parts have unit
  // variance apart from the tag mean, so thresholds are set on a sd of ~1.9.
  constexpr double kCuts[] = {-1.4, -0.45, 0.45, 1.4};
  for (std::size_t n = 0; n < spec.num_examples; ++n) {
    LabeledExample ex;
    const auto user = static_cast<std::int32_t>(1 + rng.below(spec.num_users));
    const auto item = static_cast<std::int32_t>(1 + rng.below(spec.num_items));
    const auto side = static_cast<std::int32_t>(1 + rng.below(spec.num_side_values));
    std::vector<std::int32_t> tags;
    const std::size_t ntags = 1 + rng.below(3);
    double tag_sum = 0.0;
    for (std::size_t t = 0; t < ntags; ++t) {
      const auto tag = static_cast<std::int32_t>(1 + rng.below(spec.num_side_values));
      tags.push_back(tag);
      tag_sum += w_tag[tag];
    }
    const double score = w_user[user] + w_item[item] + w_side[side] + tag_sum / static_cast<double>(ntags);
    int rating = 1;
    for (double cut : kCuts) rating += score > cut ? 1 : 0;
    ex.features = {{user}, {item}, {side}, std::move(tags)};
    ex.labels = {rating >= kPositiveRatingThreshold ? 1.0 : 0.0, static_cast<double>(rating)};
    ex.rating = rating;
    data.append(ex);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Split cache

namespace {

void write_indices(std::ostream& out, const char* tag, const std::vector<std::size_t>& idx) {
  out << tag << " " << idx.size() << "\n";
  for (std::size_t i = 0; i < idx.size(); ++i) out << (i ? " " : "") << idx[i];
  out << "\n";
}

std::vector<std::size_t> read_indices(std::istream& in, const char* tag) {
  std::string got;
  std::size_t n = 0;
  if (!(in >> got >> n) || got != tag) throw DataError(std::string("split cache: expected ") + tag);
  std::vector<std::size_t> idx(n);
  for (auto& v : idx) {
    if (!(in >> v)) throw DataError(std::string("split cache: truncated ") + tag);
  }
  return idx;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void write_split_cache(std::ostream& out, const Dataset& data, const DatasetSplit& split) {
  std::ostringstream body;
  body << "kind " << to_string(data.kind()) << "\n";
  body << "fields " << data.fields().size() << "\n";
  for (const auto& f : data.fields()) {
    body << f.name << " " << f.vocab_size << " " << (f.multi_valued ? 1 : 0) << "\n";
  }
  body << "tasks " << data.tasks().size() << "\n";
  for (const auto& t : data.tasks()) body << t.name << " " << to_string(t.kind) << "\n";
  body << "examples " << data.size() << "\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t f = 0; f < data.fields().size(); ++f) {
      const auto bag = data.feature(f, i);
      body << (f ? " " : "");
      for (std::size_t j = 0; j < bag.size(); ++j) body << (j ? "," : "") << bag[j];
    }
    for (std::size_t t = 0; t < data.tasks().size(); ++t) {
      std::snprintf(buf, sizeof buf, "%.17g", data.label(t, i));
      body << " " << buf;
    }
    body << " " << data.rating(i) << "\n";
  }
  write_indices(body, "train", split.train);
  write_indices(body, "validation", split.validation);
  write_indices(body, "test", split.test);

  const std::string text = body.str();
  out << "dml-split-cache " << kSplitCacheVersion << "\n";
  out << "seed " << split.seed << "\n";
  out << "hash " << hex64(fnv1a64(text)) << "\n";
  out << text;
}

std::pair<Dataset, DatasetSplit> read_split_cache(std::istream& in) {
  std::string magic, tag, hash;
  int version = 0;
  std::uint64_t seed = 0;
  if (!(in >> magic >> version) || magic != "dml-split-cache") throw DataError("split cache: missing header");
  if (version != kSplitCacheVersion) {
    throw DataError("split cache: unsupported version " + std::to_string(version));
  }
  if (!(in >> tag >> seed) || tag != "seed") throw DataError("split cache: missing seed");
  if (!(in >> tag >> hash) || tag != "hash") throw DataError("split cache: missing hash");
  in.get();
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (hex64(fnv1a64(text)) != hash) throw DataError("split cache: content hash mismatch");

  std::istringstream body(text);
  std::string kind_name;
  std::size_t n_fields = 0, n_tasks = 0, n_examples = 0;
  if (!(body >> tag >> kind_name) || tag != "kind") throw DataError("split cache: missing kind");
  if (!(body >> tag >> n_fields) || tag != "fields") throw DataError("split cache: missing fields");
  std::vector<FieldInfo> fields(n_fields);
  for (auto& f : fields) {
    int multi = 0;
    body >> f.name >> f.vocab_size >> multi;
    f.multi_valued = multi != 0;
  }
  if (!(body >> tag >> n_tasks) || tag != "tasks") throw DataError("split cache: missing tasks");
  std::vector<TaskSpec> tasks(n_tasks);
  for (auto& t : tasks) {
    std::string kind;
    body >> t.name >> kind;
    t.kind = kind == "regression" ? TaskKind::regression : TaskKind::classification;
  }
  if (!(body >> tag >> n_examples) || tag != "examples") throw DataError("split cache: missing examples");

  Dataset data(parse_dataset_kind(kind_name), fields, tasks);
  std::string token;
  for (std::size_t i = 0; i < n_examples; ++i) {
    LabeledExample ex;
    for (std::size_t f = 0; f < n_fields; ++f) {
      body >> token;
      std::vector<std::int32_t> bag;
      for (auto part : split_fields(token, ",")) {
        std::int32_t v = 0;
        if (!parse_number(part, v)) throw DataError("split cache: bad index '" + std::string(part) + "'");
        bag.push_back(v);
      }
      ex.features.push_back(std::move(bag));
    }
    ex.labels.resize(n_tasks);
    for (auto& l : ex.labels) body >> l;
    if (!(body >> ex.rating)) throw DataError("split cache: truncated examples");
    data.append(ex);
  }
  DatasetSplit split;
  split.seed = seed;
  split.train = read_indices(body, "train");
  split.validation = read_indices(body, "validation");
  split.test = read_indices(body, "test");
  return {std::move(data), std::move(split)};
}

void save_split_cache(const std::filesystem::path& path, const Dataset& data,
                      const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_split_cache(out, data, split);
}

std::pair<Dataset, DatasetSplit> load_split_cache(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_split_cache(in);
}

}  // namespace dml
