#include "patcnn/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include "patcnn/config.hpp"
#include "patcnn/csv.hpp"
#include "patcnn/groundtruth.hpp"
#include "patcnn/metrics.hpp"
#include "patcnn/nifti.hpp"
#include "patcnn/overlay.hpp"
#include "patcnn/phantom.hpp"
#include "patcnn/stats.hpp"
#include "patcnn/trainer.hpp"

namespace fs = std::filesystem;

namespace patcnn {
namespace {

// On-disk layout shared by the subcommands.
constexpr const char* kImageFile = "image.nii";
constexpr const char* kChamberFile = "chambers.nii";
constexpr const char* kTruthFile = "pat.nii";
constexpr const char* kCohortFile = "cohort.csv";
constexpr const char* kPhantomCfgFile = "phantom.cfg";
constexpr const char* kLatentPatvFile = "patv.csv";
constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kSplitFile = "split.csv";
constexpr const char* kTrainLogFile = "train_log.csv";
constexpr const char* kPredictionDir = "predictions";
constexpr const char* kCandidateDir = "candidates";
constexpr const char* kEvalFile = "eval.csv";
constexpr const char* kPatvFile = "patv.csv";
constexpr const char* kReportFile = "stats_report.csv";
constexpr const char* kTableFile = "stats_table.txt";
constexpr const char* kOverlayDir = "overlays";

std::string fmt(double v, const char* f = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> discover_cases(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("data root " + root.string() + " is not a directory");
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / kImageFile)) ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw IoError("no cases (directories holding " + std::string(kImageFile) + ") under " + root.string());
  return ids;
}

std::vector<std::string> select_cases(const std::vector<std::string>& all, const std::string& which) {
  if (which.empty() || which == "all") return all;
  for (const auto& id : all)
    if (id == which) return {id};
  throw IoError("unknown case '" + which + "'");
}

// split.csv: case_id,subset with subset in {train, val, test}.
std::map<std::string, std::string> read_split(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto id = t.column("case_id"), sub = t.column("subset");
  std::map<std::string, std::string> out;
  for (const auto& row : t.rows) out[row[id]] = row[sub];
  return out;
}

struct Context {
  PipelineConfig cfg;
  fs::path data;
  fs::path output;
  std::ostream& out;
};

int cmd_phantom(Context& ctx, bool with_images) {
  const auto& cfg = ctx.cfg;
  const std::size_t n = cfg.phantom_count;
  if (n < 1) throw DomainError("phantom: --n must be at least 1");
  // The cohort model needs at least 10 draws; smaller requests keep the
  // first n of a 10-case cohort.
  Cohort cohort = generate_cohort(std::max<std::size_t>(n, 10), cfg.phantom.seed, cfg.effects, with_images,
                                  cfg.phantom);
  cohort.records.resize(n);
  fs::create_directories(ctx.data);
  if (with_images) {
    for (std::size_t i = 0; i < n; ++i) {
      const PhantomCase& c = cohort.cases[i];
      const fs::path dir = ctx.data / cohort.records[i].case_id;
      fs::create_directories(dir);
      save_volume(c.image, dir / kImageFile);
      save_mask(c.chambers, dir / kChamberFile);
      save_mask(c.pat, dir / kTruthFile);
    }
  } else {
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& r : cohort.records) rows.emplace_back(r.case_id, r.patv);
    write_text(ctx.data / kLatentPatvFile, format_patv_csv(rows));
  }
  write_text(ctx.data / kCohortFile, format_records_csv(cohort.records));
  KeyValueDoc doc;
  doc.set_int("phantom.n", static_cast<long long>(n));
  write_section(doc, cfg.phantom);
  write_section(doc, cfg.effects);
  write_text(ctx.data / kPhantomCfgFile, doc.dump());
  ctx.out << "phantom: wrote " << n << (with_images ? " cases" : " records") << " to " << ctx.data.string() << "\n";
  return kExitOk;
}

int cmd_groundtruth(Context& ctx, const std::string& which) {
  const auto ids = select_cases(discover_cases(ctx.data), which);
  const fs::path dir = ctx.output / kCandidateDir;
  fs::create_directories(dir);
  std::string csv = "case_id,candidate_voxels,dice_vs_truth\n";
  for (const auto& id : ids) {
    const ImageVolume img = load_volume(ctx.data / id / kImageFile);
    const LabelMask chambers = load_mask(ctx.data / id / kChamberFile);
    const LabelMask cand = candidate_pat_mask(img, chambers, ctx.cfg.groundtruth);
    save_mask(cand, dir / (id + ".nii"));
    std::string dice = "";
    if (fs::exists(ctx.data / id / kTruthFile)) dice = fmt(dice_score(cand, load_mask(ctx.data / id / kTruthFile)));
    csv += id + "," + std::to_string(foreground_count(cand)) + "," + dice + "\n";
    ctx.out << "groundtruth: " << id << " candidate voxels " << foreground_count(cand)
            << (dice.empty() ? "" : ", Dice vs truth " + dice) << "\n";
  }
  write_text(ctx.output / "candidates.csv", csv);
  return kExitOk;
}

int cmd_train(Context& ctx, bool no_test, const std::string& labels) {
  const auto ids = discover_cases(ctx.data);
  const auto& tc = ctx.cfg.train;
  DatasetSplit split;
  if (no_test) split.train_val = ids;
  else split = split_dataset(ids, tc.test_fraction, tc.seed);

  std::vector<TrainingCase> cases;
  for (const auto& id : split.train_val) {
    fs::path label;
    if (labels == "truth") label = ctx.data / id / kTruthFile;
    else if (labels == "candidate") label = ctx.output / kCandidateDir / (id + ".nii");
    else throw DomainError("train: --labels must be truth or candidate");
    cases.push_back({id, load_volume(ctx.data / id / kImageFile), load_mask(label)});
  }
  fs::create_directories(ctx.output);
  std::string log = "epoch,train_loss,val_loss\n";
  const Checkpoint ckpt = train(cases, tc, [&](const EpochLog& e) {
    log += std::to_string(e.epoch) + "," + fmt(e.train_loss, "%.8f") + "," + fmt(e.val_loss, "%.8f") + "\n";
    ctx.out << "epoch " << e.epoch << "/" << tc.epochs << " train " << fmt(e.train_loss) << " val "
            << fmt(e.val_loss) << (e.improved ? " *" : "") << "\n";
  });
  save_checkpoint(ckpt, ctx.output / kCheckpointFile);
  write_text(ctx.output / kTrainLogFile, log);

  std::map<std::string, std::string> subset;
  for (const auto& id : split.train_val) subset[id] = "train";
  for (const auto& id : ckpt.meta.val_ids) subset[id] = "val";
  for (const auto& id : split.test) subset[id] = "test";
  std::string csv = "case_id,subset\n";
  for (const auto& [id, s] : subset) csv += id + "," + s + "\n";
  write_text(ctx.output / kSplitFile, csv);
  ctx.out << "train: best epoch " << ckpt.meta.best_epoch << ", checkpoint " << (ctx.output / kCheckpointFile).string()
          << "\n";
  return kExitOk;
}

int cmd_predict(Context& ctx, const std::string& which, const std::string& ckpt_path) {
  const fs::path ckpt_file = ckpt_path.empty() ? ctx.output / kCheckpointFile : fs::path(ckpt_path);
  Predictor predictor(load_checkpoint(ckpt_file));
  const auto ids = select_cases(discover_cases(ctx.data), which);
  const fs::path dir = ctx.output / kPredictionDir;
  fs::create_directories(dir);
  for (const auto& id : ids) {
    const LabelMask pred = predictor.predict(load_volume(ctx.data / id / kImageFile));
    save_mask(pred, dir / (id + ".nii"));
    ctx.out << "predict: " << id << " foreground voxels " << foreground_count(pred) << "\n";
  }
  return kExitOk;
}

int cmd_evaluate(Context& ctx, const std::string& subset) {
  auto ids = discover_cases(ctx.data);
  if (subset != "all") {
    if (subset != "train" && subset != "test") throw DomainError("evaluate: --subset must be train, test or all");
    const auto split = read_split(ctx.output / kSplitFile);
    std::vector<std::string> keep;
    for (const auto& id : ids) {
      const auto it = split.find(id);
      if (it == split.end()) continue;
      const bool in_train = it->second == "train" || it->second == "val";
      if ((subset == "train") == in_train) keep.push_back(id);
    }
    ids = keep;
  }
  if (ids.empty()) throw DomainError("evaluate: subset '" + subset + "' is empty");
  std::vector<EvalRow> rows;
  double dice_sum = 0;
  for (const auto& id : ids) {
    const fs::path pred_file = ctx.output / kPredictionDir / (id + ".nii");
    if (!fs::exists(pred_file)) throw IoError("evaluate: no prediction for " + id + " (run predict first)");
    const EvalResult r = evaluate_case(load_mask(pred_file), load_mask(ctx.data / id / kTruthFile));
    rows.push_back({id, r});
    dice_sum += r.dice;
  }
  write_text(ctx.output / kEvalFile, format_eval_csv(rows));
  ctx.out << "evaluate: " << rows.size() << " cases (" << subset << "), mean Dice "
          << fmt(dice_sum / static_cast<double>(rows.size())) << "\n";
  return kExitOk;
}

int cmd_quantify(Context& ctx, const std::string& source) {
  const auto ids = discover_cases(ctx.data);
  std::vector<std::pair<std::string, double>> rows;
  for (const auto& id : ids) {
    fs::path f;
    if (source == "predictions") f = ctx.output / kPredictionDir / (id + ".nii");
    else if (source == "truth") f = ctx.data / id / kTruthFile;
    else throw DomainError("quantify: --source must be predictions or truth");
    const LabelMask m = load_mask(f);
    rows.emplace_back(id, patv_cm3(m, m.spacing()));
  }
  write_text(ctx.output / kPatvFile, format_patv_csv(rows));
  ctx.out << "quantify: PATV for " << rows.size() << " cases written to " << (ctx.output / kPatvFile).string()
          << "\n";
  return kExitOk;
}

int cmd_stats(Context& ctx, const std::string& records_path, const std::string& patv_path) {
  const fs::path rec = records_path.empty() ? ctx.data / kCohortFile : fs::path(records_path);
  const fs::path pv = patv_path.empty() ? ctx.output / kPatvFile : fs::path(patv_path);
  const auto records = join_patv(read_records_csv(rec), read_patv_csv(pv));
  const auto reports = run_paper_analysis(records);
  const std::string table = format_report_table(reports);
  write_text(ctx.output / kReportFile, format_report_csv(reports));
  write_text(ctx.output / kTableFile, table);
  ctx.out << table;
  return kExitOk;
}

int cmd_overlay(Context& ctx, const std::string& which) {
  const auto ids = select_cases(discover_cases(ctx.data), which);
  std::size_t written = 0;
  for (const auto& id : ids) {
    const ImageVolume img = load_volume(ctx.data / id / kImageFile);
    std::optional<LabelMask> truth, pred;
    if (fs::exists(ctx.data / id / kTruthFile)) truth = load_mask(ctx.data / id / kTruthFile);
    const fs::path pf = ctx.output / kPredictionDir / (id + ".nii");
    if (fs::exists(pf)) pred = load_mask(pf);
    written += write_overlays(img, truth ? &*truth : nullptr, pred ? &*pred : nullptr, ctx.output / kOverlayDir, id)
                   .size();
  }
  ctx.out << "overlay: wrote " << written << " slice images to " << (ctx.output / kOverlayDir).string() << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PAT segmentation pipeline on cardiac MR volumes", "patcnn"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> data_root, output_root;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override one config key (key=value), repeatable");
  app.add_option("--data-root", data_root, "directory of case folders");
  app.add_option("--output-root", output_root, "directory for outputs");
  app.add_option("--seed", seed, "global seed");

  auto* phantom = app.add_subcommand("phantom", "generate synthetic cases and a patient cohort");
  std::optional<std::size_t> n;
  std::optional<double> noise;
  bool fluid = false, records_only = false;
  phantom->add_option("--n", n, "number of cases");
  phantom->add_option("--noise", noise, "noise sigma as a fraction of intensity range");
  phantom->add_flag("--fluid", fluid, "add pericardial fluid confounders");
  phantom->add_flag("--records-only", records_only, "write the cohort CSV with latent PATV, no images");

  auto* gt = app.add_subcommand("groundtruth", "Otsu candidate PAT masks from chamber masks");
  std::string gt_case = "all";
  gt->add_option("--case", gt_case, "case id or all");

  auto* tr = app.add_subcommand("train", "train the network");
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr;
  bool no_test = false;
  std::string labels = "truth";
  tr->add_option("--epochs", epochs);
  tr->add_option("--batch-size", batch);
  tr->add_option("--lr", lr);
  tr->add_flag("--no-test-split", no_test, "train on every case (no held-out test set)");
  tr->add_option("--labels", labels, "truth or candidate")->check(CLI::IsMember({"truth", "candidate"}));

  auto* pr = app.add_subcommand("predict", "segment cases with a checkpoint");
  std::string pr_case = "all", ckpt;
  pr->add_option("--case", pr_case, "case id or all");
  pr->add_option("--checkpoint", ckpt, "checkpoint file (default <output>/model.ckpt)");

  auto* ev = app.add_subcommand("evaluate", "Dice, Hausdorff and PATV per case");
  std::string subset = "all";
  ev->add_option("--subset", subset)->check(CLI::IsMember({"train", "test", "all"}));

  auto* qu = app.add_subcommand("quantify", "PATV in cm3 per case");
  std::string source = "predictions";
  qu->add_option("--source", source)->check(CLI::IsMember({"predictions", "truth"}));

  auto* st = app.add_subcommand("stats", "screening and multivariate regressions");
  std::string records_path, patv_path;
  st->add_option("--records", records_path, "cohort CSV (default <data>/cohort.csv)");
  st->add_option("--patv", patv_path, "PATV CSV (default <output>/patv.csv)");

  auto* ov = app.add_subcommand("overlay", "per-slice PNGs with truth (red) and prediction (green) contours");
  std::string ov_case = "all";
  ov->add_option("--case", ov_case, "case id or all");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    KeyValueDoc doc = config_file.empty() ? KeyValueDoc{} : KeyValueDoc::load(config_file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        err << "usage error: --set expects key=value, got '" << s << "'\n";
        return kExitUsage;
      }
      doc.merge(KeyValueDoc::parse(s, "--set"));
    }
    if (const char* e = std::getenv("PATCNN_DATA_ROOT")) doc.set("paths.data_root", e);
    if (const char* e = std::getenv("PATCNN_OUTPUT_ROOT")) doc.set("paths.output_root", e);
    if (data_root) doc.set("paths.data_root", *data_root);
    if (output_root) doc.set("paths.output_root", *output_root);
    if (seed) doc.set_u64("seed", *seed);
    if (n) doc.set_int("phantom.n", static_cast<long long>(*n));
    if (noise) doc.set_double("phantom.noise_sigma", *noise);
    if (fluid) doc.set_bool("phantom.fluid_present", true);
    if (epochs) doc.set_int("train.epochs", static_cast<long long>(*epochs));
    if (batch) doc.set_int("train.batch_size", static_cast<long long>(*batch));
    if (lr) doc.set_double("train.learning_rate", *lr);

    Context ctx{read_pipeline_config(doc), {}, {}, out};
    ctx.data = ctx.cfg.data_root;
    ctx.output = ctx.cfg.output_root;

    if (*phantom) return cmd_phantom(ctx, !records_only);
    if (*gt) return cmd_groundtruth(ctx, gt_case);
    if (*tr) return cmd_train(ctx, no_test, labels);
    if (*pr) return cmd_predict(ctx, pr_case, ckpt);
    if (*ev) return cmd_evaluate(ctx, subset);
    if (*qu) return cmd_quantify(ctx, source);
    if (*st) return cmd_stats(ctx, records_path, patv_path);
    if (*ov) return cmd_overlay(ctx, ov_case);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitModuleError;
  }
  err << "usage error: no subcommand\n";
  return kExitUsage;
}

}  // namespace patcnn
