#include "dml/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "dml/error.hpp"
#include "dml/nn.hpp"
#include "dml/params.hpp"
#include "dml/random.hpp"

namespace dml {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config: " + key + " expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(out)) {
    throw ConfigError("config: " + key + " expects a number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config: " + key + " expects true or false, got '" + value + "'");
}

char parse_delimiter(const std::string& value) {
  if (value == "tab" || value == "\\t") return '\t';
  if (value == "comma") return ',';
  if (value.size() == 1) return value[0];
  throw ConfigError("config: delimiter must be a single character, 'tab' or 'comma'");
}

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string checkpoint_name(const ExperimentConfig& config, std::uint64_t seed) {
  return std::string(to_string(config.dataset)) + "_" + std::string(to_string(config.backbone)) +
         "_" + std::string(to_string(config.variant)) + "_seed" + std::to_string(seed) + ".ckpt";
}

bool better(const Evaluation& a, double best_primary, double best_tiebreak) {
  if (a.primary != best_primary) return a.primary > best_primary;
  return a.tiebreak > best_tiebreak;
}

}  // namespace

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "dataset") c.dataset = parse_dataset_kind(value);
    else if (key == "data_dir") c.data_dir = value;
    else if (key == "interactions") c.interactions = value;
    else if (key == "item_categories") c.item_categories = value;
    else if (key == "delimiter") c.delimiter = parse_delimiter(value);
    else if (key == "split_cache") c.split_cache = value;
    else if (key == "backbone") c.backbone = parse_backbone(value);
    else if (key == "variant") c.variant = parse_variant(value);
    else if (key == "seeds") c.seeds = parse_seed_list(value);
    else if (key == "epochs") c.epochs = parse_u64(key, value);
    else if (key == "patience") c.patience = parse_u64(key, value);
    else if (key == "batch_size") c.batch_size = parse_u64(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_real(key, value);
    else if (key == "eval_every") c.eval_every = parse_u64(key, value);
    else if (key == "split_seed") c.split_seed = parse_u64(key, value);
    else if (key == "augment_seed") c.augment_seed = parse_u64(key, value);
    else if (key == "subsample") c.subsample = parse_real(key, value);
    else if (key == "consistency_max_pairs") c.consistency_max_pairs = parse_u64(key, value);
    else if (key == "metric_seed") c.metric_seed = parse_u64(key, value);
    else if (key == "embed_dim") c.embed_dim = parse_u64(key, value);
    else if (key == "expert_dim") c.expert_dim = parse_u64(key, value);
    else if (key == "tower_hidden") c.tower_hidden = parse_u64(key, value);
    else if (key == "gkd_dim") c.gkd_dim = parse_u64(key, value);
    else if (key == "synthetic_examples") c.synthetic_examples = parse_u64(key, value);
    else if (key == "synthetic_seed") c.synthetic_seed = parse_u64(key, value);
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "save_checkpoints") c.save_checkpoints = parse_bool(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config: " + key + ": " + e.what());
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_u64("seeds", trim(item.substr(0, dash)));
      const auto hi = parse_u64("seeds", trim(item.substr(dash + 1)));
      if (hi < lo) throw ConfigError("config: empty seed range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_u64("seeds", item));
    }
  }
  if (seeds.empty()) throw ConfigError("config: seeds must list at least one seed");
  return seeds;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(config, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_config(in);
}

void validate(const ExperimentConfig& c) {
  if (c.epochs == 0) throw ConfigError("config: epochs must be positive");
  if (c.batch_size == 0) throw ConfigError("config: batch_size must be positive");
  if (c.eval_every == 0) throw ConfigError("config: eval_every must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
  if (!(c.subsample > 0.0 && c.subsample <= 1.0)) {
    throw ConfigError("config: subsample must lie in (0, 1]");
  }
  if (c.consistency_max_pairs == 0) throw ConfigError("config: consistency_max_pairs must be positive");
  if (c.seeds.empty()) throw ConfigError("config: seeds must list at least one seed");
  auto sorted = c.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("config: seeds must be distinct");
  }
  if (c.dataset == DatasetKind::synthetic && c.synthetic_examples < 20) {
    throw ConfigError("config: synthetic_examples must be at least 20");
  }
}

PreparedData prepare_data(const ExperimentConfig& config) {
  if (!config.split_cache.empty() && std::filesystem::exists(config.split_cache)) {
    auto [data, split] = load_split_cache(config.split_cache);
    if (data.kind() != config.dataset) {
      throw ConfigError("split cache " + config.split_cache.string() + " holds " +
                        std::string(to_string(data.kind())) + ", config asks for " +
                        std::string(to_string(config.dataset)));
    }
    return {std::move(data), std::move(split)};
  }

  Dataset data;
  switch (config.dataset) {
    case DatasetKind::synthetic: {
      SyntheticSpec spec;
      spec.num_examples = config.synthetic_examples;
      spec.seed = config.synthetic_seed;
      data = make_synthetic(spec);
      break;
    }
    case DatasetKind::movielens: {
      if (config.data_dir.empty()) throw ConfigError("config: ml1m needs data_dir");
      const auto set = parse_movielens(config.data_dir / "ratings.dat", config.data_dir / "users.dat",
                                       config.data_dir / "movies.dat");
      data = derive_labels(set, DatasetKind::movielens);
      break;
    }
    case DatasetKind::electronics: {
      if (config.interactions.empty()) throw ConfigError("config: electronics needs interactions");
      auto set = parse_interactions(config.interactions, config.delimiter);
      if (!config.item_categories.empty()) {
        attach_item_categories(set, config.item_categories, config.delimiter);
      }
      AugmentStats stats;
      const auto augmented = augment_negatives(set, config.augment_seed, &stats);
      data = derive_labels(augmented, DatasetKind::electronics);
      break;
    }
  }
  if (config.subsample < 1.0) {
    const auto rows = subsample_indices(data.size(), config.subsample, config.split_seed);
    data = select_examples(data, rows);
  }
  auto split = split_dataset(data.size(), config.split_seed);
  if (!config.split_cache.empty()) save_split_cache(config.split_cache, data, split);
  return {std::move(data), std::move(split)};
}

std::optional<double> EvalReport::metric(const std::string& name) const {
  if (name == "consistency") return consistency;
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  return std::nullopt;
}

ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& data) {
  auto model = make_model_config(config.backbone, config.variant, data.fields(), data.tasks());
  if (config.embed_dim != 0) model.embed_dim = config.embed_dim;
  if (config.expert_dim != 0) {
    model.backbone.expert_dim = config.expert_dim;
    model.head.d0 = config.expert_dim;
  }
  if (config.tower_hidden != 0) model.head.tower_hidden = config.tower_hidden;
  if (config.gkd_dim != 0) model.head.d1 = config.gkd_dim;
  validate(model.backbone);
  return model;
}

Evaluation evaluate(const ModelConfig& model, const ParameterStore& params, const Dataset& data,
                    std::span<const std::size_t> part, const ExperimentConfig& config) {
  const auto& tasks = data.tasks();
  std::vector<std::vector<double>> preds(tasks.size());
  std::vector<std::vector<double>> labels(tasks.size());
  std::vector<int> ratings;

  BatchIterator it(data, std::vector<std::size_t>(part.begin(), part.end()), config.batch_size, 0);
  it.start_sequential();
  while (auto batch = it.next()) {
    Tape tape;
    ParamContext ctx(tape, params);
    const auto out = model_forward(ctx, model, *batch);
    for (std::size_t k = 0; k < tasks.size(); ++k) {
      const auto v = tape.value(out[k]).data();
      preds[k].insert(preds[k].end(), v.begin(), v.end());
      const auto l = batch->labels[k].data();
      labels[k].insert(labels[k].end(), l.begin(), l.end());
    }
    ratings.insert(ratings.end(), batch->ratings.begin(), batch->ratings.end());
  }

  Evaluation ev;
  double auc_sum = 0.0, mse_sum = 0.0;
  std::size_t n_auc = 0, n_mse = 0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    if (tasks[k].kind == TaskKind::classification) {
      const double a = auc(preds[k], labels[k]);
      ev.metrics.emplace_back("auc_" + tasks[k].name, a);
      auc_sum += a;
      ++n_auc;
    } else {
      const double m = mse(preds[k], labels[k]);
      ev.metrics.emplace_back("mse_" + tasks[k].name, m);
      mse_sum += m;
      ++n_mse;
    }
  }
  ev.tiebreak = n_mse ? -mse_sum / static_cast<double>(n_mse) : 0.0;
  ev.primary = n_auc ? auc_sum / static_cast<double>(n_auc) : ev.tiebreak;

  // Rating-ordered consistency applies when the tasks are (positive, rating).
  if (data.kind() != DatasetKind::electronics && tasks.size() == 2) {
    const auto c = consistency(ratings, preds[0], preds[1], config.consistency_max_pairs,
                               config.metric_seed);
    ev.consistency = c.ratio;
    ev.reversed_pairs = c.reversed_pairs;
  }
  return ev;
}

RunArtifact run_single(const ExperimentConfig& config, const PreparedData& prepared,
                       std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  const auto& data = prepared.data;
  const auto model = model_config_for(config, data);

  RunArtifact run;
  run.report.dataset = std::string(to_string(data.kind()));
  run.report.backbone = std::string(to_string(config.backbone));
  run.report.variant = std::string(to_string(config.variant));
  run.report.seed = seed;
  run.report.examples = prepared.split.test.size();

  ParameterStore params = initialize_model(model, seed);
  run.report.parameters = params.trainable_count();
  ParameterStore best = params;
  double best_primary = -std::numeric_limits<double>::infinity();
  double best_tiebreak = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  AdamState adam;
  adam.hyper.lr = config.learning_rate;
  BatchIterator train(data, prepared.split.train, config.batch_size, derive_seed(seed, "batches"));

  try {
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      const auto epoch_start = std::chrono::steady_clock::now();
      train.start_epoch(epoch);
      double loss_sum = 0.0;
      std::size_t seen = 0;
      while (auto batch = train.next()) {
        Tape tape;
        ParamContext ctx(tape, params);
        const auto preds = model_forward(ctx, model, *batch);
        const NodeId loss = total_loss(tape, preds, *batch, model);
        const double value = tape.value(loss).item();
        if (!std::isfinite(value)) throw NumericError("non-finite training loss");
        loss_sum += value * static_cast<double>(batch->size);
        seen += batch->size;
        const auto grads = backward(tape, loss);
        adam_step(adam, params, parameter_gradients(tape, grads));
      }

      EpochRecord record;
      record.epoch = epoch;
      record.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
      const bool eval_now = epoch % config.eval_every == 0 || epoch == config.epochs;
      bool stop = false;
      if (eval_now) {
        const auto ev = evaluate(model, params, data, prepared.split.validation, config);
        record.validation_score = ev.primary;
        if (better(ev, best_primary, best_tiebreak)) {
          best_primary = ev.primary;
          best_tiebreak = ev.tiebreak;
          best = params;
          run.report.best_epoch = epoch;
          stale = 0;
        } else if (++stale >= config.patience && config.patience > 0) {
          stop = true;
        }
      }
      record.seconds = seconds_since(epoch_start);
      run.curve.push_back(record);
      if (stop) break;
    }
  } catch (const NumericError& e) {
    run.report.status = "diverged";
    run.diagnostic = "seed " + std::to_string(seed) + ": " + e.what() + " at epoch " +
                     std::to_string(run.curve.size() + 1) + " (step " + std::to_string(adam.step) +
                     ")";
    run.train_seconds = seconds_since(start);
    return run;
  }

  const auto test = evaluate(model, best, data, prepared.split.test, config);
  run.report.metrics = test.metrics;
  run.report.consistency = test.consistency;
  run.best_validation_score = best_primary;

  if (config.save_checkpoints && !config.out_dir.empty()) {
    run.checkpoint = config.out_dir / "checkpoints" / checkpoint_name(config, seed);
    std::filesystem::create_directories(run.checkpoint.parent_path());
    save_checkpoint(run.checkpoint, best);
  }
  run.train_seconds = seconds_since(start);
  return run;
}

std::vector<RunArtifact> run_experiment(const ExperimentConfig& config) {
  validate(config);
  const auto prepared = prepare_data(config);
  return run_experiment(config, prepared);
}

std::vector<RunArtifact> run_experiment(const ExperimentConfig& config, const PreparedData& prepared) {
  validate(config);
  std::vector<RunArtifact> runs;
  for (const auto seed : config.seeds) {
    runs.push_back(run_single(config, prepared, seed));
    if (!runs.back().diagnostic.empty()) std::clog << "warning: " << runs.back().diagnostic << "\n";
  }
  if (config.out_dir.empty()) return runs;

  std::filesystem::create_directories(config.out_dir);
  std::vector<EvalReport> reports;
  for (const auto& r : runs) reports.push_back(r.report);
  {
    std::ofstream out(config.out_dir / "runs.tsv", std::ios::binary);
    write_reports(out, reports);
  }
  std::ofstream curves(config.out_dir / "curves.tsv", std::ios::binary);
  curves << "seed\tepoch\ttrain_loss\tvalidation\tseconds\n";
  for (const auto& r : runs) {
    for (const auto& e : r.curve) {
      curves << r.report.seed << '\t' << e.epoch << '\t' << format_real(e.train_loss) << '\t'
             << (e.validation_score ? format_real(*e.validation_score) : "-") << '\t'
             << format_real(e.seconds) << '\n';
    }
  }
  return runs;
}

void write_reports(std::ostream& out, std::span<const EvalReport> reports) {
  out << kReportHeader << '\n';
  for (const auto& r : reports) {
    out << r.dataset << '\t' << r.backbone << '\t' << r.variant << '\t' << r.seed << '\t'
        << r.status << '\t' << r.examples << '\t' << r.parameters << '\t' << r.best_epoch << '\t'
        << (r.consistency ? format_real(*r.consistency) : "-") << '\t';
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
      if (i) out << ';';
      out << r.metrics[i].first << '=' << format_real(r.metrics[i].second);
    }
    out << '\n';
  }
}

std::vector<EvalReport> read_reports(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) {
    throw DataError("run records: missing or unexpected header");
  }
  std::vector<EvalReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    const auto where = "run records line " + std::to_string(line_no);
    if (cols.size() != 10) throw DataError(where + ": expected 10 columns");
    try {
      EvalReport r;
      r.dataset = cols[0];
      r.backbone = cols[1];
      r.variant = cols[2];
      r.seed = parse_u64("seed", cols[3]);
      r.status = cols[4];
      r.examples = parse_u64("test_examples", cols[5]);
      r.parameters = parse_u64("parameters", cols[6]);
      r.best_epoch = parse_u64("best_epoch", cols[7]);
      if (cols[8] != "-") r.consistency = parse_real("consistency", cols[8]);
      std::istringstream ms(cols[9]);
      std::string item;
      while (std::getline(ms, item, ';')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw DataError(where + ": bad metric '" + item + "'");
        r.metrics.emplace_back(item.substr(0, eq), parse_real("metric", item.substr(eq + 1)));
      }
      out.push_back(std::move(r));
    } catch (const ConfigError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<EvalReport> load_reports(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_reports(in);
}

std::string model_label(const std::string& backbone, const std::string& variant) {
  static const std::map<std::string, std::string> backbones = {
      {"single_task", "Single Task"}, {"shared_bottom", "SB"}, {"mmoe", "MMOE"}, {"ple", "PLE"}};
  static const std::map<std::string, std::string> variants = {
      {"none", ""}, {"full", "+DML"}, {"ctfm_only", "+CTFM"}, {"gkd_only", "+GKD"},
      {"v0", "+DML_v0"}};
  const auto b = backbones.find(backbone);
  const auto v = variants.find(variant);
  return (b == backbones.end() ? backbone : b->second) +
         (v == variants.end() ? "+" + variant : v->second);
}

namespace {

std::string group_label(std::span<const EvalReport> runs) {
  if (runs.empty()) return "(none)";
  std::string label = model_label(runs.front().backbone, runs.front().variant);
  for (const auto& r : runs) {
    if (r.backbone != runs.front().backbone || r.variant != runs.front().variant) return "mixed";
  }
  return label;
}

std::vector<double> metric_values(std::span<const EvalReport> runs, const std::string& metric) {
  std::vector<double> xs;
  for (const auto& r : runs) {
    if (r.status != "ok") continue;
    const auto v = r.metric(metric);
    if (!v) throw ConfigError("compare: run " + std::to_string(r.seed) + " lacks metric " + metric);
    xs.push_back(*v);
  }
  return xs;
}

}  // namespace

Comparison compare(std::span<const EvalReport> base, std::span<const EvalReport> treat,
                   const std::string& metric, Direction direction) {
  if (base.empty() || treat.empty()) throw ConfigError("compare: both sides need run records");
  for (const auto& r : base) {
    if (r.dataset != base.front().dataset) throw ConfigError("compare: base mixes datasets");
  }
  for (const auto& r : treat) {
    if (r.dataset != base.front().dataset) {
      throw ConfigError("compare: datasets differ (" + base.front().dataset + " vs " + r.dataset + ")");
    }
  }
  const auto xs = metric_values(base, metric);
  const auto ys = metric_values(treat, metric);
  if (xs.size() < 2 || ys.size() < 2) {
    throw ConfigError("compare: need at least two finished runs per side");
  }
  Comparison c;
  c.dataset = base.front().dataset;
  c.base_label = group_label(base);
  c.treat_label = group_label(treat);
  c.metric = metric;
  c.direction = direction;
  c.base_runs = xs.size();
  c.treat_runs = ys.size();
  c.base_mean = mean(xs);
  c.base_std = stddev(xs);
  c.treat_mean = mean(ys);
  c.treat_std = stddev(ys);
  c.delta = c.treat_mean - c.base_mean;
  const auto t = welch_t_test(xs, ys, direction);
  c.t = t.t;
  c.df = t.df;
  c.p_value = t.p;
  c.significant = t.p < kSignificanceLevel;
  return c;
}

std::string format_comparison(const Comparison& c) {
  std::ostringstream out;
  out << "dataset\tbase\ttreat\tmetric\tdirection\tbase_runs\ttreat_runs\tbase_mean\tbase_std\t"
         "treat_mean\ttreat_std\tdelta\tt\tdf\tp\tsignificant\n";
  out << c.dataset << '\t' << c.base_label << '\t' << c.treat_label << '\t' << c.metric << '\t'
      << to_string(c.direction) << '\t' << c.base_runs << '\t' << c.treat_runs << '\t'
      << format_real(c.base_mean) << '\t' << format_real(c.base_std) << '\t'
      << format_real(c.treat_mean) << '\t' << format_real(c.treat_std) << '\t'
      << format_real(c.delta) << '\t' << format_real(c.t) << '\t' << format_real(c.df) << '\t'
      << format_real(c.p_value) << '\t' << (c.significant ? "yes" : "no") << '\n';
  return out.str();
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "tsv") return ReportFormat::tsv;
  if (name == "text" || name == "table") return ReportFormat::text;
  throw ConfigError("unknown report format '" + std::string(name) + "' (tsv, text)");
}

std::string emit_report(std::span<const EvalReport> reports, ReportFormat format) {
  static const std::vector<std::string> backbone_order = {"single_task", "shared_bottom", "mmoe",
                                                          "ple"};
  static const std::vector<std::string> variant_order = {"none", "ctfm_only", "gkd_only", "v0",
                                                         "full"};
  auto rank = [](const std::vector<std::string>& order, const std::string& s) {
    const auto it = std::find(order.begin(), order.end(), s);
    return static_cast<std::size_t>(it - order.begin());
  };

  struct Row {
    std::string dataset, backbone, variant;
    std::vector<const EvalReport*> runs;
  };
  std::vector<Row> rows;
  std::map<std::string, std::vector<std::string>> dataset_metrics;
  for (const auto& r : reports) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& row) {
      return row.dataset == r.dataset && row.backbone == r.backbone && row.variant == r.variant;
    });
    if (it == rows.end()) {
      rows.push_back({r.dataset, r.backbone, r.variant, {}});
      it = rows.end() - 1;
    }
    it->runs.push_back(&r);
    auto& names = dataset_metrics[r.dataset];
    auto add = [&](const std::string& m) {
      if (std::find(names.begin(), names.end(), m) == names.end()) names.push_back(m);
    };
    for (const auto& m : r.metrics) add(m.first);
    if (r.consistency) add("consistency");
  }
  std::stable_sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
    const auto ka = std::make_tuple(a.dataset, rank(backbone_order, a.backbone), a.backbone,
                                    rank(variant_order, a.variant), a.variant);
    const auto kb = std::make_tuple(b.dataset, rank(backbone_order, b.backbone), b.backbone,
                                    rank(variant_order, b.variant), b.variant);
    return ka < kb;
  });

  std::ostringstream out;
  std::string current;
  std::vector<std::vector<std::string>> table;
  auto flush_text = [&]() {
    if (table.empty()) return;
    std::vector<std::size_t> width(table.front().size(), 0);
    for (const auto& line : table) {
      for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    }
    for (const auto& line : table) {
      std::string text;
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) text += "  ";
        text += line[i] + std::string(width[i] - line[i].size(), ' ');
      }
      text.erase(text.find_last_not_of(' ') + 1);
      out << text << '\n';
    }
    table.clear();
  };

  for (const auto& row : rows) {
    const auto& names = dataset_metrics[row.dataset];
    if (row.dataset != current) {
      current = row.dataset;
      if (format == ReportFormat::tsv) {
        out << "dataset\tmodel\tbackbone\tvariant\truns\tdiverged";
        for (const auto& m : names) out << '\t' << m << "_mean\t" << m << "_std";
        out << '\n';
      } else {
        flush_text();
        if (out.tellp() > 0) out << '\n';
        out << "dataset: " << current << '\n';
        std::vector<std::string> header = {"model", "runs"};
        for (const auto& m : names) header.push_back(m);
        table.push_back(header);
      }
    }
    std::size_t diverged = 0;
    std::vector<const EvalReport*> ok;
    for (const auto* r : row.runs) {
      if (r->status == "ok") ok.push_back(r);
      else ++diverged;
    }
    std::vector<std::string> cells;
    const auto label = model_label(row.backbone, row.variant);
    if (format == ReportFormat::tsv) {
      out << row.dataset << '\t' << label << '\t' << row.backbone << '\t' << row.variant << '\t'
          << ok.size() << '\t' << diverged;
    } else {
      cells = {label, std::to_string(ok.size()) + (diverged ? " (+" + std::to_string(diverged) +
                                                                   " diverged)"
                                                             : "")};
    }
    for (const auto& m : names) {
      std::vector<double> xs;
      for (const auto* r : ok) {
        if (auto v = r->metric(m)) xs.push_back(*v);
      }
      if (format == ReportFormat::tsv) {
        if (xs.empty()) out << "\t-\t-";
        else out << '\t' << format_real(mean(xs)) << '\t' << format_real(stddev(xs));
      } else {
        char buf[64];
        if (xs.empty()) std::snprintf(buf, sizeof buf, "-");
        else std::snprintf(buf, sizeof buf, "%.4f ± %.4f", mean(xs), stddev(xs));
        cells.push_back(buf);
      }
    }
    if (format == ReportFormat::tsv) out << '\n';
    else table.push_back(cells);
  }
  flush_text();
  return out.str();
}

}  // namespace dml
