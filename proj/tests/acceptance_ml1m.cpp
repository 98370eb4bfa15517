// MovieLens-1M acceptance runs. Reads the raw files from $DML_ML1M_DIR
// (ratings.dat, users.dat, movies.dat). $DML_ML1M_SUBSAMPLE (e.g. 0.5)
// trains on a fraction of the data and widens the absolute brackets by 0.01.
// $DML_ML1M_OUT keeps the run records. Exits 77 when the data is absent.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "dml/harness.hpp"

namespace fs = std::filesystem;
using namespace dml;

namespace {

constexpr int kSkip = 77;
constexpr std::size_t kSeeds = 5;
constexpr double kAucLo = 0.800, kAucHi = 0.820;
constexpr double kMseLo = 0.75, kMseHi = 0.80;
constexpr double kSubsampleWidening = 0.01;
constexpr double kAblationSlack = 0.002;

struct Summary {
  double auc = 0.0;
  double mse = 0.0;
  double consistency = 0.0;
  std::size_t ok = 0;
};

Summary summarize(const std::vector<RunArtifact>& runs) {
  Summary s;
  std::vector<double> a, m, c;
  for (const auto& r : runs) {
    if (r.report.status != "ok") continue;
    a.push_back(r.report.metric("auc_positive").value_or(0.0));
    m.push_back(r.report.metric("mse_rating").value_or(0.0));
    c.push_back(r.report.consistency.value_or(0.0));
  }
  s.ok = a.size();
  s.auc = mean(a);
  s.mse = mean(m);
  s.consistency = mean(c);
  return s;
}

}  // namespace

int main() {
  const char* dir = std::getenv("DML_ML1M_DIR");
  const bool have = dir && fs::exists(fs::path(dir) / "ratings.dat") && fs::exists(fs::path(dir) / "users.dat") &&
                    fs::exists(fs::path(dir) / "movies.dat");
  if (!have) {
    std::printf("SKIP criterion 5: MovieLens-1M files not found (set DML_ML1M_DIR)\n");
    std::printf("SKIP criterion 6: MovieLens-1M files not found (set DML_ML1M_DIR)\n");
    return kSkip;
  }

  ExperimentConfig base;
  base.dataset = DatasetKind::movielens;
  base.data_dir = dir;
  base.seeds.clear();
  for (std::size_t s = 1; s <= kSeeds; ++s) base.seeds.push_back(s);
  if (const char* f = std::getenv("DML_ML1M_SUBSAMPLE")) base.subsample = std::stod(f);
  const char* out = std::getenv("DML_ML1M_OUT");
  const double widen = base.subsample < 1.0 ? kSubsampleWidening : 0.0;

  const PreparedData prepared = prepare_data(base);
  std::printf("# %zu examples, %zu train / %zu validation / %zu test\n", prepared.data.size(),
              prepared.split.train.size(), prepared.split.validation.size(), prepared.split.test.size());

  auto run = [&](BackboneKind b, DmlVariant v) {
    ExperimentConfig c = base;
    c.backbone = b;
    c.variant = v;
    c.out_dir = out ? fs::path(out) / (std::string(to_string(b)) + "_" + std::string(to_string(v))) : fs::path();
    c.save_checkpoints = out != nullptr;
    const Summary s = summarize(run_experiment(c, prepared));
    std::printf("# %-10s auc %.4f  mse %.4f  consistency %.4f  (%zu ok)\n",
                model_label(std::string(to_string(b)), std::string(to_string(v))).c_str(), s.auc, s.mse,
                s.consistency, s.ok);
    std::fflush(stdout);
    return s;
  };

  int failures = 0;
  const Summary sb = run(BackboneKind::shared_bottom, DmlVariant::none);
  const Summary sb_dml = run(BackboneKind::shared_bottom, DmlVariant::full);
  {
    const bool auc_in = sb.auc >= kAucLo - widen && sb.auc <= kAucHi + widen;
    const bool mse_in = sb.mse >= kMseLo - widen && sb.mse <= kMseHi + widen;
    const bool ok = sb.ok == kSeeds && sb_dml.ok == kSeeds && auc_in && mse_in && sb_dml.auc >= sb.auc &&
                    sb_dml.consistency >= sb.consistency;
    std::printf("%s criterion 5: SB auc %.4f in [%.3f, %.3f], mse %.4f in [%.3f, %.3f], "
                "SB+DML auc %.4f >= %.4f, consistency %.4f >= %.4f\n",
                ok ? "PASS" : "FAIL", sb.auc, kAucLo - widen, kAucHi + widen, sb.mse, kMseLo - widen,
                kMseHi + widen, sb_dml.auc, sb.auc, sb_dml.consistency, sb.consistency);
    failures += !ok;
  }

  const Summary ple = run(BackboneKind::ple, DmlVariant::none);
  const Summary ctfm = run(BackboneKind::ple, DmlVariant::ctfm_only);
  const Summary gkd = run(BackboneKind::ple, DmlVariant::gkd_only);
  const Summary v0 = run(BackboneKind::ple, DmlVariant::v0);
  const Summary full = run(BackboneKind::ple, DmlVariant::full);
  {
    const double best_other = std::max({ctfm.auc, gkd.auc, v0.auc});
    const bool ok = full.auc >= best_other - kAblationSlack && full.auc >= ple.auc;
    std::printf("%s criterion 6: PLE+DML auc %.4f >= %.4f - %.3f and >= PLE %.4f\n", ok ? "PASS" : "FAIL",
                full.auc, best_other, kAblationSlack, ple.auc);
    failures += !ok;
  }
  return failures == 0 ? 0 : 1;
}
