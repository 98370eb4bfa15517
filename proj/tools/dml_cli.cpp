// dml: prepare data, train backbone/variant combinations, compare and
// report runs, and audit gradients.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include "dml/error.hpp"
#include "dml/grad_audit.hpp"
#include "dml/harness.hpp"
#include "dml/kernels.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> settings;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
  auto setting = [&o, cmd](const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&o, key](const std::string& v) { o.settings[key] = v; }, help);
  };
  setting("--dataset", "dataset", "ml1m, electronics or synthetic");
  setting("--data-dir", "data_dir", "directory with ratings.dat, users.dat, movies.dat");
  setting("--interactions", "interactions", "electronics interactions file");
  setting("--item-categories", "item_categories", "electronics item -> category file");
  setting("--delimiter", "delimiter", "field delimiter for interaction files");
  setting("--split-cache", "split_cache", "processed split cache");
  setting("--split-seed", "split_seed", "seed of the 8:1:1 split");
  setting("--subsample", "subsample", "fraction of examples to keep");
}

dml::ExperimentConfig resolve(const Overrides& o) {
  dml::ExperimentConfig config;
  if (!o.config_path.empty()) config = dml::load_config(o.config_path);
  for (const auto& [k, v] : o.settings) dml::apply_setting(config, k, v);
  if (o.seed) config.seeds = {*o.seed};
  dml::validate(config);
  return config;
}

std::vector<dml::EvalReport> load_all(const std::vector<std::string>& paths) {
  std::vector<dml::EvalReport> out;
  for (const auto& p : paths) {
    const std::filesystem::path path = std::filesystem::is_directory(p)
                                           ? std::filesystem::path(p) / "runs.tsv"
                                           : std::filesystem::path(p);
    for (auto& r : dml::load_reports(path)) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task recommender training with cross-task mutual learning"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads for kernels (0 = runtime default)");

  Overrides prep_o;
  auto* prep = app.add_subcommand("prepare-data", "parse, label, augment and split a dataset");
  add_common(prep, prep_o);
  std::string prep_out;
  prep->add_option("--out", prep_out, "split cache to write")->required();

  Overrides train_o;
  auto* train = app.add_subcommand("train", "train every configured seed and write run records");
  add_common(train, train_o);
  train->add_option("--seed", train_o.seed, "single seed (overrides seeds)");
  auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
    train->add_option_function<std::string>(
        flag, [&, key](const std::string& v) { train_o.settings[key] = v; }, help);
  };
  opt("--seeds", "seeds", "seed list, e.g. 1,2,3 or 1-5");
  opt("--backbone", "backbone", "single_task, shared_bottom, mmoe or ple");
  opt("--variant", "variant", "none, ctfm_only, gkd_only, v0 or full");
  opt("--out", "out_dir", "output directory");
  opt("--epochs", "epochs", "maximum epochs");
  opt("--patience", "patience", "early-stopping patience in evaluations");
  opt("--batch-size", "batch_size", "mini-batch size");
  opt("--learning-rate", "learning_rate", "Adam step size");

  std::vector<std::string> base_paths, treat_paths;
  std::string metric = "auc_positive";
  std::string direction = "auto";
  auto* cmp = app.add_subcommand("compare", "one-tailed Welch test of treat over base");
  cmp->add_option("--base", base_paths, "run records (files or run directories)")->required();
  cmp->add_option("--treat", treat_paths, "run records (files or run directories)")->required();
  cmp->add_option("--metric", metric, "metric name, e.g. auc_positive, mse_rating, consistency");
  cmp->add_option("--direction", direction, "greater, less or auto (less for mse_*)");

  std::vector<std::string> report_paths;
  std::string format = "text";
  std::string report_out;
  auto* rep = app.add_subcommand("report", "aggregate run records into a mean ± std table");
  rep->add_option("inputs", report_paths, "run records (files or run directories)")->required();
  rep->add_option("--format", format, "text or tsv");
  rep->add_option("--out", report_out, "write to file instead of stdout");

  dml::AuditOptions audit;
  auto* gaud = app.add_subcommand("grad-audit", "finite-difference and gradient-isolation suites");
  gaud->add_option("--seed", audit.seed, "seed for operands and parameters");
  gaud->add_option("--directions", audit.directions_per_parameter,
                   "random directions per parameter for composite models");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) dml::kernels::set_num_threads(threads);

  try {
    if (*prep) {
      auto config = resolve(prep_o);
      config.split_cache.clear();
      const auto prepared = dml::prepare_data(config);
      dml::save_split_cache(prep_out, prepared.data, prepared.split);
      std::cout << "dataset " << dml::to_string(prepared.data.kind()) << ": "
                << prepared.data.size() << " examples (train " << prepared.split.train.size()
                << ", validation " << prepared.split.validation.size() << ", test "
                << prepared.split.test.size() << ") -> " << prep_out << "\n";
      for (const auto& f : prepared.data.fields()) {
        std::cout << "  field " << f.name << ": vocab " << f.vocab_size
                  << (f.multi_valued ? " (multi)" : "") << "\n";
      }
      return 0;
    }
    if (*train) {
      const auto config = resolve(train_o);
      const auto runs = dml::run_experiment(config);
      std::vector<dml::EvalReport> reports;
      for (const auto& r : runs) {
        reports.push_back(r.report);
        std::cout << "seed " << r.report.seed << " " << r.report.status << " best_epoch "
                  << r.report.best_epoch << " (" << r.train_seconds << " s)";
        for (const auto& [k, v] : r.report.metrics) std::cout << " " << k << "=" << v;
        if (r.report.consistency) std::cout << " consistency=" << *r.report.consistency;
        std::cout << "\n";
      }
      std::cout << "\n" << dml::emit_report(reports, dml::ReportFormat::text);
      if (!config.out_dir.empty()) std::cout << "records: " << (config.out_dir / "runs.tsv") << "\n";
      bool any_ok = false;
      for (const auto& r : reports) any_ok = any_ok || r.status == "ok";
      return any_ok ? 0 : 3;
    }
    if (*cmp) {
      const auto base = load_all(base_paths);
      const auto treat = load_all(treat_paths);
      const auto dir = direction == "auto"
                           ? (metric.rfind("mse_", 0) == 0 ? dml::Direction::less
                                                           : dml::Direction::greater)
                           : dml::parse_direction(direction);
      std::cout << dml::format_comparison(dml::compare(base, treat, metric, dir));
      return 0;
    }
    if (*rep) {
      const auto text = dml::emit_report(load_all(report_paths), dml::parse_report_format(format));
      if (report_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(report_out, std::ios::binary);
        out << text;
      }
      return 0;
    }
    if (*gaud) {
      std::size_t failed = 0;
      for (const auto& c : dml::run_grad_audit(audit)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
        failed += c.passed ? 0 : 1;
      }
      std::cout << (failed ? "grad-audit: " + std::to_string(failed) + " failed\n"
                           : std::string("grad-audit: all passed\n"));
      return failed ? 1 : 0;
    }
  } catch (const dml::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
