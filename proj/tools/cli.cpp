#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqe/dataset.hpp"
#include "lqe/error.hpp"
#include "lqe/image_io.hpp"
#include "lqe/imageqc.hpp"
#include "lqe/lqap.hpp"
#include "lqe/synthetic.hpp"
#include "lqe/trainer.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;

namespace lqe::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root() {
  const char* env = std::getenv("LQE_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path(".");
}

fs::path resolve_out(const std::string& flag, const std::string& fallback) {
  return flag.empty() ? output_root() / fallback : fs::path(flag);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string file_stem_id(const std::string& source_id) {
  std::string s = fs::path(source_id).replace_extension().generic_string();
  for (char& c : s) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return s;
}

TrainConfig load_train_config(const std::string& path, const std::vector<std::string>& sets) {
  if (path.empty()) throw UsageError("--config is required");
  if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path);
  TrainConfig cfg = load_config(path);
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    try {
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
  }
  return cfg;
}

std::string dataset_fingerprint(const TrainConfig& cfg, const Dataset& ds) {
  return cfg.data_dir.empty() ? "synthetic:" + fingerprint_dataset(ds) : "dir:" + fingerprint_directory(cfg.data_dir);
}

std::size_t export_heatmaps(const Model& model, const ParamSet& params, std::span<const Image> images,
                            const fs::path& dir) {
  fs::create_directories(dir);
  std::size_t written = 0;
  for (const Image& img : images) {
    const ModelOutput out = model.forward(img, params);
    const auto maps = export_attention_heatmaps(out.attention.maps, model.stage_side(), img.height);
    const std::string stem = file_stem_id(img.source_id);
    for (std::size_t q = 0; q < maps.size(); ++q) {
      write_png(dir / (stem + "_q" + std::to_string(q) + ".png"), maps[q]);
      ++written;
    }
  }
  return written;
}

void write_eval_outputs(const EvalResult& res, const fs::path& dir, const std::string& prefix) {
  write_text(dir / (prefix + "report.json"), report_json(res.report) + '\n');
  write_text(dir / (prefix + "triage.csv"), triage_csv(res.report.triage));
  std::string lines;
  for (const SampleLog& log : res.logs) lines += to_json_line(log) + '\n';
  write_text(dir / (prefix + "samples.jsonl"), lines);
}

// ---------------------------------------------------------------- qc

struct QcArgs {
  std::string input;
  std::string out;
  double tau_b = QcThresholds{}.brightness;
  double tau_f = QcThresholds{}.focus;
};

int cmd_qc(const QcArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.input)) throw UsageError("input directory not found: " + a.input);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.input)) {
    if (entry.is_regular_file() && looks_like_image(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::ostringstream csv;
  csv << "source_id,brightness,focus_score,accepted,reject_reason,crop_box\n";
  csv << std::setprecision(10);
  std::size_t accepted = 0;
  for (const fs::path& f : files) {
    const Image img = read_image(f);
    const QcVerdict v = qc_gate(img, a.tau_b, a.tau_f);
    accepted += v.accepted;
    const CropBox& b = v.crop_box;
    csv << f.filename().string() << ',' << v.brightness << ',' << v.focus_score << ','
        << (v.accepted ? "true" : "false") << ',' << to_string(v.reject_reason) << ',' << b.top << ':' << b.left
        << ':' << b.height << ':' << b.width << '\n';
  }
  const fs::path report = resolve_out(a.out, "qc_report.csv");
  write_text(report, csv.str());
  out << "qc: " << files.size() << " images, " << accepted << " accepted, " << files.size() - accepted
      << " rejected -> " << report.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out;
  int classes = 5;
  int per_grade = 200;
  int side = 128;
  double noise = SyntheticSpec{}.noise_sigma;
  std::string blob_counts;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticSpec spec;
  spec.num_classes = a.classes;
  spec.images_per_grade = a.per_grade;
  spec.side = a.side;
  spec.noise_sigma = a.noise;
  spec.seed = a.seed;
  spec.blob_counts = default_blob_counts(a.classes);
  if (!a.blob_counts.empty()) {
    TrainConfig tmp;
    set_config_value(tmp, "synthetic.blob_counts", a.blob_counts);
    spec.blob_counts = tmp.synthetic.blob_counts;
  }
  try {
    spec.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
  const Dataset ds = make_synthetic(spec);
  const fs::path root = resolve_out(a.out, "synthetic");
  write_dataset(root, ds);
  out << "synth: " << ds.train.size() << " train, " << ds.val.size() << " val, " << ds.test.size()
      << " test images -> " << root.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  int epochs = 0;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int attn_samples = 4;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg = load_train_config(a.config, a.sets);
  if (a.epochs > 0) cfg.epochs = a.epochs;
  if (!a.data.empty()) cfg.data_dir = a.data;
  if (a.seed_given) cfg.seed = a.seed;
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }

  const fs::path dir = resolve_out(a.out, "runs/train");
  fs::create_directories(dir);
  const Dataset data = dataset_for(cfg);

  RunManifest m;
  m.command = "train";
  m.config = dump_config(cfg);
  m.seed = cfg.seed;
  m.code_version = LQE_VERSION_STRING;
  m.dataset_fingerprint = dataset_fingerprint(cfg, data);
  m.started_at = utc_timestamp();
  m.output_dir = fs::absolute(dir).string();
  write_manifest(dir, m);
  write_text(dir / "config.txt", m.config);

  TrainOptions opts;
  opts.output_dir = dir;
  opts.on_epoch = [&out](const HistoryRow& r, const TrainState&) {
    out << "epoch " << std::setw(3) << r.epoch << "  loss " << std::fixed << std::setprecision(4) << r.train_loss
        << "  val_acc " << r.val_acc << "  val_qwk " << r.val_qwk << "  u " << r.val_u_mean << '\n'
        << std::defaultfloat << std::flush;
  };
  const TrainResult res = train(cfg, data, opts);
  const TrainState& st = res.state;
  const ParamSet best = st.best_params();

  nlohmann::ordered_json summary;
  summary["epochs_run"] = res.history.size();
  summary["early_stopped"] = res.early_stopped;
  summary["best_epoch"] = st.best_epoch;
  summary["best_val_qwk"] = st.best_val_qwk;
  summary["incidents"] = st.incidents;
  if (!data.test.empty()) {
    const EvalResult test = evaluate(st.model, best, data.test, cfg.tta_enabled, cfg.readout);
    write_eval_outputs(test, dir, "test_");
    summary["test_accuracy"] = test.report.accuracy;
    summary["test_qwk"] = test.report.qwk;
    out << "test  acc " << test.report.accuracy << "  qwk " << test.report.qwk << '\n';
  }
  if (a.attn_samples > 0) {
    std::vector<Image> imgs;
    for (std::size_t i = 0; i < data.val.size() && static_cast<int>(i) < a.attn_samples; ++i) {
      imgs.push_back(data.val[i].image);
    }
    export_heatmaps(st.model, best, imgs, dir / "artifacts" / "attn" / ("epoch_" + std::to_string(st.best_epoch)));
  }
  write_completion(dir, summary.dump());
  out << "train: best val_qwk " << st.best_val_qwk << " at epoch " << st.best_epoch << " -> " << dir.string()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string split_dir;
  std::string out;
  bool tta = false;
  bool no_tta = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!fs::is_regular_file(a.checkpoint)) throw UsageError("checkpoint not found: " + a.checkpoint);
  if (!fs::is_directory(a.split_dir)) throw UsageError("split directory not found: " + a.split_dir);
  const LoadedModel lm = load_checkpoint(a.checkpoint);
  IngestOptions ingest;
  ingest.side = lm.config.input_side;
  const auto items = load_split_dir(a.split_dir, lm.config.num_classes, ingest);
  if (items.empty()) throw InvalidInput("no images found under " + a.split_dir);
  const bool tta = a.tta ? true : (a.no_tta ? false : lm.config.tta_enabled);
  const EvalResult res = evaluate(lm.state.model, lm.state.params, items, tta, lm.config.readout);
  const fs::path dir = resolve_out(a.out, "runs/eval");
  write_eval_outputs(res, dir, "");
  out << report_table(res.report);
  out << "eval: " << res.logs.size() << " images (tta " << (tta ? "on" : "off") << ") -> " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- attn

struct AttnArgs {
  std::string checkpoint;
  std::vector<std::string> images;
  std::string out;
};

int cmd_attn(const AttnArgs& a, std::ostream& out) {
  if (!fs::is_regular_file(a.checkpoint)) throw UsageError("checkpoint not found: " + a.checkpoint);
  for (const std::string& p : a.images) {
    if (!fs::is_regular_file(p)) throw UsageError("image not found: " + p);
    if (!looks_like_image(p)) throw UsageError("not a PNG or JPEG image: " + p);
  }
  const LoadedModel lm = load_checkpoint(a.checkpoint);
  IngestOptions ingest;
  ingest.side = lm.config.input_side;
  std::vector<Image> imgs;
  for (const std::string& p : a.images) {
    Image raw = read_image(p);
    raw.source_id = fs::path(p).filename().string();
    imgs.push_back(prepare_image(raw, ingest));
  }
  const fs::path dir =
      resolve_out(a.out, "runs/attn") / "artifacts" / "attn" / ("epoch_" + std::to_string(lm.epoch));
  const std::size_t n = export_heatmaps(lm.state.model, lm.state.params, imgs, dir);
  out << "attn: " << n << " heatmaps -> " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string axis;
  int epochs = 0;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

struct Variant {
  std::string label;
  TrainConfig cfg;
};

std::vector<Variant> ablation_variants(const TrainConfig& base, const std::string& axis) {
  const TrainConfig defaults;
  std::vector<Variant> v;
  auto add = [&v, &base](const std::string& label, auto&& edit) {
    TrainConfig c = base;
    edit(c);
    v.push_back({label, c});
  };
  if (axis == "stage") {
    for (int s : {2, 3}) add("stage=" + std::to_string(s), [s](TrainConfig& c) { c.stage_select = s; });
  } else if (axis == "queries") {
    for (int n : {4, 8, 16}) add("queries=" + std::to_string(n), [n](TrainConfig& c) { c.num_queries = n; });
  } else if (axis == "div") {
    const double on = base.beta > 0.0 ? base.beta : defaults.beta;
    add("div=off", [](TrainConfig& c) { c.beta = 0.0; });
    add("div=on", [on](TrainConfig& c) { c.beta = on; });
  } else if (axis == "lb") {
    const double on = base.gamma > 0.0 ? base.gamma : defaults.gamma;
    add("lb=off", [](TrainConfig& c) { c.gamma = 0.0; });
    add("lb=on", [on](TrainConfig& c) { c.gamma = on; });
  } else if (axis == "spent") {
    const double on = base.eta > 0.0 ? base.eta : defaults.eta;
    add("spent=off", [](TrainConfig& c) { c.entropy_penalty = false; });
    add("spent=on", [on](TrainConfig& c) {
      c.entropy_penalty = true;
      c.eta = on;
    });
  } else if (axis == "anneal") {
    add("anneal=off", [](TrainConfig& c) { c.anneal = false; });
    add("anneal=on", [](TrainConfig& c) { c.anneal = true; });
  } else {
    throw UsageError("unknown ablation axis '" + axis + "' (expected stage, queries, div, lb, spent or anneal)");
  }
  return v;
}

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  TrainConfig base = load_train_config(a.config, a.sets);
  if (a.epochs > 0) base.epochs = a.epochs;
  if (a.seed_given) base.seed = a.seed;
  const std::vector<Variant> variants = ablation_variants(base, a.axis);
  for (const Variant& v : variants) {
    try {
      v.cfg.validate();
    } catch (const InvalidInput& e) {
      throw UsageError(v.label + ": " + e.what());
    }
  }

  const fs::path dir = resolve_out(a.out, "runs/ablate");
  fs::create_directories(dir);
  const Dataset data = dataset_for(base);
  RunManifest m;
  m.command = "ablate " + a.axis;
  m.config = dump_config(base);
  m.seed = base.seed;
  m.code_version = LQE_VERSION_STRING;
  m.dataset_fingerprint = dataset_fingerprint(base, data);
  m.started_at = utc_timestamp();
  m.output_dir = fs::absolute(dir).string();
  write_manifest(dir, m);

  const auto& eval_split = data.test.empty() ? data.val : data.test;
  std::ostringstream csv;
  csv << std::setprecision(10);
  csv << "axis,variant,epochs_run,best_val_qwk,accuracy,qwk\n";
  for (const Variant& v : variants) {
    const TrainResult res = train(v.cfg, data);
    const EvalResult ev = evaluate(res.state.model, res.state.best_params(), eval_split, v.cfg.tta_enabled,
                                   v.cfg.readout);
    csv << a.axis << ',' << v.label << ',' << res.history.size() << ',' << res.state.best_val_qwk << ','
        << ev.report.accuracy << ',' << ev.report.qwk << '\n';
    out << v.label << "  acc " << ev.report.accuracy << "  qwk " << ev.report.qwk << '\n' << std::flush;
  }
  const fs::path path = dir / ("ablation_" + a.axis + ".csv");
  write_text(path, csv.str());
  write_completion(dir, nlohmann::json{{"variants", variants.size()}, {"report", path.string()}}.dump());
  out << "ablate: " << variants.size() << " variants -> " << path.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lesion-query evidential ordinal grading toolkit"};
  app.set_version_flag("--version", LQE_VERSION_STRING);
  app.require_subcommand(1);

  QcArgs qc;
  auto* qc_cmd = app.add_subcommand("qc", "Quality-control gate over a directory of images; writes a CSV report");
  qc_cmd->add_option("input_dir", qc.input, "Directory of PNG/JPEG images")->required();
  qc_cmd->add_option("--out", qc.out, "Report path (default $LQE_OUTPUT_ROOT/qc_report.csv)");
  qc_cmd->add_option("--tau-brightness", qc.tau_b, "Minimum mean brightness on the 0-255 scale")
      ->capture_default_str();
  qc_cmd->add_option("--tau-focus", qc.tau_f, "Minimum Laplacian variance")->capture_default_str();

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "Generate the synthetic ordinal lesion dataset as PNG folders");
  sy_cmd->add_option("--out", sy.out, "Dataset root (default $LQE_OUTPUT_ROOT/synthetic)");
  sy_cmd->add_option("--classes", sy.classes, "Number of grades")->capture_default_str();
  sy_cmd->add_option("--images-per-grade", sy.per_grade, "Images generated per grade")->capture_default_str();
  sy_cmd->add_option("--side", sy.side, "Image side in pixels")->capture_default_str();
  sy_cmd->add_option("--noise", sy.noise, "Pixel noise standard deviation")->capture_default_str();
  sy_cmd->add_option("--blob-counts", sy.blob_counts, "Per-grade blob count ranges, e.g. 0-0,1-3,4-7");
  sy_cmd->add_option("--seed", sy.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a model; writes manifest, history, checkpoints and reports");
  tr_cmd->add_option("--config", tr.config, "Run config (key = value lines)");
  tr_cmd->add_option("--set", tr.sets, "Override a config key: --set lr=1e-3 (repeatable)");
  tr_cmd->add_option("--epochs", tr.epochs, "Override the epoch budget");
  tr_cmd->add_option("--data", tr.data, "Dataset root with train/val/test folders (default: synthetic)");
  tr_cmd->add_option("--out", tr.out, "Run directory (default $LQE_OUTPUT_ROOT/runs/train)");
  auto* tr_seed = tr_cmd->add_option("--seed", tr.seed, "Random seed (overrides the config)");
  tr_cmd->add_option("--attn-samples", tr.attn_samples, "Validation images exported as heatmaps")
      ->capture_default_str();

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a grade-per-folder split");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  ev_cmd->add_option("--split-dir", ev.split_dir, "Directory with 0..K-1 grade subfolders")->required();
  ev_cmd->add_option("--out", ev.out, "Output directory (default $LQE_OUTPUT_ROOT/runs/eval)");
  auto* tta_flag = ev_cmd->add_flag("--tta", ev.tta, "Average over flips");
  ev_cmd->add_flag("--no-tta", ev.no_tta, "Disable flip averaging")->excludes(tta_flag);

  AttnArgs at;
  auto* at_cmd = app.add_subcommand("attn", "Export per-query attention heatmaps as PNG");
  at_cmd->add_option("--checkpoint", at.checkpoint, "Checkpoint file")->required();
  at_cmd->add_option("images", at.images, "Input images")->required();
  at_cmd->add_option("--out", at.out, "Output root (default $LQE_OUTPUT_ROOT/runs/attn)");

  AblateArgs ab;
  auto* ab_cmd = app.add_subcommand("ablate", "Train one variant per value of an ablation axis");
  ab_cmd->add_option("--config", ab.config, "Base run config");
  ab_cmd->add_option("--axis", ab.axis, "stage | queries | div | lb | spent | anneal")->required();
  ab_cmd->add_option("--set", ab.sets, "Override a config key (repeatable)");
  ab_cmd->add_option("--epochs", ab.epochs, "Override the epoch budget");
  ab_cmd->add_option("--out", ab.out, "Output directory (default $LQE_OUTPUT_ROOT/runs/ablate)");
  auto* ab_seed = ab_cmd->add_option("--seed", ab.seed, "Random seed (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*qc_cmd) return cmd_qc(qc, out);
    if (*sy_cmd) return cmd_synth(sy, out);
    if (*tr_cmd) {
      tr.seed_given = tr_seed->count() > 0;
      return cmd_train(tr, out);
    }
    if (*ev_cmd) return cmd_eval(ev, out);
    if (*at_cmd) return cmd_attn(at, out);
    if (*ab_cmd) {
      ab.seed_given = ab_seed->count() > 0;
      return cmd_ablate(ab, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace lqe::cli
