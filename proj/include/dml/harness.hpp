#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dml/backbones.hpp"
#include "dml/data.hpp"
#include "dml/dml_head.hpp"
#include "dml/metrics.hpp"
#include "dml/model.hpp"

namespace dml {

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::synthetic;
  std::filesystem::path data_dir;         // ml1m: ratings.dat, users.dat, movies.dat
  std::filesystem::path interactions;     // electronics: user,item,rating[,timestamp]
  std::filesystem::path item_categories;  // electronics, optional
  char delimiter = ',';
  std::filesystem::path split_cache;      // processed split from prepare-data, optional

  BackboneKind backbone = BackboneKind::shared_bottom;
  DmlVariant variant = DmlVariant::full;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  std::size_t epochs = 10;
  std::size_t patience = 2;
  std::size_t batch_size = 512;
  double learning_rate = 1e-3;
  std::size_t eval_every = 1;

  std::uint64_t split_seed = 2023;
  std::uint64_t augment_seed = 2023;
  double subsample = 1.0;
  std::size_t consistency_max_pairs = kDefaultMaxPairs;
  std::uint64_t metric_seed = 17;

  // Model widths; zero keeps the standard size.
  std::size_t embed_dim = 0;
  std::size_t expert_dim = 0;
  std::size_t tower_hidden = 0;
  std::size_t gkd_dim = 0;

  std::size_t synthetic_examples = 1000;
  std::uint64_t synthetic_seed = 7;

  std::filesystem::path out_dir = "runs";
  bool save_checkpoints = true;
};

/// Parses "key = value" lines ('#' starts a comment). Unknown keys and
/// invalid values throw ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies a single key = value setting, as from a config file.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
void validate(const ExperimentConfig& config);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct PreparedData {
  Dataset data;
  DatasetSplit split;
};

/// Loads the split cache when configured; otherwise parses, labels,
/// augments (electronics), subsamples and splits the raw data.
PreparedData prepare_data(const ExperimentConfig& config);

/// Per-run evaluation record.
struct EvalReport {
  std::string dataset;
  std::string backbone;
  std::string variant;
  std::uint64_t seed = 0;
  std::string status = "ok";  // "ok" or "diverged"
  std::size_t examples = 0;
  std::size_t parameters = 0;
  std::size_t best_epoch = 0;
  std::optional<double> consistency;
  /// auc_<task> for classification, mse_<task> for regression, in task order.
  std::vector<std::pair<std::string, double>> metrics;

  std::optional<double> metric(const std::string& name) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_score;
  double seconds = 0.0;
};

struct RunArtifact {
  EvalReport report;
  std::filesystem::path checkpoint;
  std::vector<EpochRecord> curve;
  double best_validation_score = 0.0;
  double train_seconds = 0.0;
  std::string diagnostic;
};

/// Metrics of a parameter set over one split part.
struct Evaluation {
  std::vector<std::pair<std::string, double>> metrics;
  std::optional<double> consistency;
  std::size_t reversed_pairs = 0;
  /// Mean classification AUC, or −mean MSE when there is no classification task.
  double primary = 0.0;
  /// −mean MSE over regression tasks (0 when none); breaks ties in primary.
  double tiebreak = 0.0;
};

Evaluation evaluate(const ModelConfig& model, const ParameterStore& params, const Dataset& data,
                    std::span<const std::size_t> part, const ExperimentConfig& config);

ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& data);

/// Trains one seed with early stopping on the validation primary metric and
/// reports test metrics of the best epoch. A non-finite loss ends the run
/// with status "diverged".
RunArtifact run_single(const ExperimentConfig& config, const PreparedData& prepared, std::uint64_t seed);

/// All seeds of one configuration. Writes runs.tsv, curves.tsv and
/// checkpoints under config.out_dir when it is non-empty.
std::vector<RunArtifact> run_experiment(const ExperimentConfig& config);
std::vector<RunArtifact> run_experiment(const ExperimentConfig& config, const PreparedData& prepared);

// Run records are tab-separated, one per line, after a fixed header:
//   dataset backbone variant seed status test_examples parameters best_epoch consistency metrics
// consistency is "-" when not applicable; metrics is "name=value;name=value".
// Reals are printed with %.17g.
inline constexpr const char* kReportHeader =
    "dataset\tbackbone\tvariant\tseed\tstatus\ttest_examples\tparameters\tbest_epoch\tconsistency\tmetrics";

void write_reports(std::ostream& out, std::span<const EvalReport> reports);
std::vector<EvalReport> read_reports(std::istream& in);
std::vector<EvalReport> load_reports(const std::filesystem::path& path);

struct Comparison {
  std::string dataset;
  std::string base_label;
  std::string treat_label;
  std::string metric;
  Direction direction = Direction::greater;
  std::size_t base_runs = 0;
  std::size_t treat_runs = 0;
  double base_mean = 0.0;
  double base_std = 0.0;
  double treat_mean = 0.0;
  double treat_std = 0.0;
  double delta = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_value = 0.5;
  bool significant = false;
};

inline constexpr double kSignificanceLevel = 0.05;

/// Welch one-tailed comparison of treat over base. Throws ConfigError if the
/// reports come from different datasets or lack the metric.
Comparison compare(std::span<const EvalReport> base, std::span<const EvalReport> treat,
                   const std::string& metric, Direction direction);
std::string format_comparison(const Comparison& c);

enum class ReportFormat { tsv, text };
ReportFormat parse_report_format(std::string_view name);

/// Rows = model (backbone, then variant), columns = metrics as mean ± std
/// over the "ok" runs.
std::string emit_report(std::span<const EvalReport> reports, ReportFormat format);

/// Short model label, e.g. "PLE+DML", "SB", "MMOE+GKD".
std::string model_label(const std::string& backbone, const std::string& variant);

}  // namespace dml
