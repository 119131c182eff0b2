#include "lqe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "lqe/checkpoint.hpp"
#include "lqe/error.hpp"
#include "lqe/lqap.hpp"

namespace lqe {

namespace {

// Stream ids for Rng::split on the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kAugmentStream = 3;
constexpr std::uint64_t kMixStream = 4;
constexpr std::uint64_t kDropoutStream = 5;

}  // namespace

LossBreakdown total_loss(std::span<const ModelOutput> outputs, std::span<const OrdinalTargets> targets,
                         double t_epoch, const TrainConfig& cfg, std::vector<ModelUpstream>* upstream) {
  const std::size_t b = outputs.size();
  if (b == 0 || targets.size() != b) throw InvalidInput("total_loss needs one target per output");
  const double inv_b = 1.0 / static_cast<double>(b);
  const std::size_t n = outputs[0].attention.weights.size();

  AnnealSchedule sched{cfg.lambda_max, cfg.t_anneal};
  const double t_eff = cfg.anneal ? t_epoch : cfg.t_anneal;

  LossBreakdown lb;
  lb.beta = cfg.beta;
  lb.gamma = cfg.gamma;
  lb.eta = cfg.entropy_penalty ? cfg.eta : 0.0;
  if (upstream) upstream->assign(b, ModelUpstream{});

  Tensor w_batch = Tensor::matrix(b, n);
  for (std::size_t i = 0; i < b; ++i) {
    const ModelOutput& out = outputs[i];
    if (out.attention.weights.size() != n) throw InvalidInput("total_loss: query count differs across batch");
    std::copy(out.attention.weights.begin(), out.attention.weights.end(), w_batch.row(i).begin());

    const EdlTerms edl = edl_loss(out.evidential, targets[i], t_eff, sched, upstream != nullptr);
    lb.edl += edl.total * inv_b;
    lb.edl_data += edl.data * inv_b;
    lb.kl += edl.kl * inv_b;
    lb.kl_term += edl.lambda * edl.kl * inv_b;
    lb.lambda = edl.lambda;

    Tensor d_div;
    bool zero_norm = false;
    lb.div += diversity_loss(out.attention.final_queries, cfg.diversity_margin, upstream ? &d_div : nullptr,
                             &zero_norm) * inv_b;
    lb.zero_norm_query = lb.zero_norm_query || zero_norm;

    if (upstream) {
      ModelUpstream& up = (*upstream)[i];
      up.d_evidence = edl.d_evidence;
      for (double& v : up.d_evidence) v *= inv_b;
      d_div.scale(cfg.beta * inv_b);
      up.d_final_queries = std::move(d_div);
      up.d_weights.assign(n, 0.0);
    }

    if (cfg.entropy_penalty) {
      const double log_m = std::log(static_cast<double>(out.attention.maps.cols()));
      const double h_min = cfg.entropy_low * log_m, h_max = cfg.entropy_high * log_m;
      Tensor d_maps;
      std::vector<double> d_w;
      lb.spent += spatial_entropy_penalty(out.attention.maps, out.attention.weights, h_min, h_max,
                                          upstream ? &d_maps : nullptr, upstream ? &d_w : nullptr) * inv_b;
      if (upstream) {
        ModelUpstream& up = (*upstream)[i];
        d_maps.scale(cfg.eta * inv_b);
        up.d_maps = std::move(d_maps);
        for (std::size_t q = 0; q < n; ++q) up.d_weights[q] += cfg.eta * inv_b * d_w[q];
      }
    }
  }

  Tensor d_lb;
  lb.lb = load_balance_loss(w_batch, upstream ? &d_lb : nullptr);
  if (upstream) {
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t q = 0; q < n; ++q) (*upstream)[i].d_weights[q] += cfg.gamma * d_lb(i, q);
    }
  }

  lb.total = lb.edl + lb.div_contribution() + lb.lb_contribution() + lb.spent_contribution();
  return lb;
}

double learning_rate(std::int64_t step, std::int64_t steps_per_epoch, const TrainConfig& cfg) {
  if (steps_per_epoch <= 0) throw InvalidInput("steps_per_epoch must be positive");
  const double warmup = cfg.warmup_epochs * static_cast<double>(steps_per_epoch);
  const double total = static_cast<double>(cfg.epochs) * static_cast<double>(steps_per_epoch);
  const double s = static_cast<double>(step);
  if (s < warmup) return cfg.lr * s / warmup;
  const double span = std::max(1.0, total - 1.0 - warmup);
  const double progress = std::clamp((s - warmup) / span, 0.0, 1.0);
  constexpr double kFloor = 0.01;
  return cfg.lr * (kFloor + (1.0 - kFloor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

bool adamw_update(ParamSet& params, AdamState& opt, const Gradients& grads, double lr, double weight_decay) {
  if (grads.size() != params.count()) throw InvalidInput("gradient count does not match parameters");
  for (const Tensor& g : grads) {
    if (!g.all_finite()) return false;
  }
  if (opt.m.empty()) {
    opt.m = params.zeros_like();
    opt.v = params.zeros_like();
  }
  ++opt.steps;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.steps));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.steps));
  for (std::size_t t = 0; t < params.count(); ++t) {
    Tensor& p = params[t];
    const Tensor& g = grads[t];
    Tensor& m = opt.m[t];
    Tensor& v = opt.v[t];
    const double decay = p.rank() >= 2 ? lr * weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= decay * p[i] + lr * mhat / (std::sqrt(vhat) + opt.eps);
    }
  }
  params.bump_version();
  return true;
}

void ema_update(std::vector<Tensor>& shadow, const ParamSet& params, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw InvalidInput("ema decay must lie in [0,1)");
  if (shadow.size() != params.count()) throw InvalidInput("EMA shadow does not mirror the parameters");
  for (std::size_t t = 0; t < shadow.size(); ++t) {
    Tensor& s = shadow[t];
    const Tensor& p = params[t];
    if (!s.same_shape(p)) throw InvalidInput("EMA shadow shape mismatch for " + params.name(t));
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = decay * s[i] + (1.0 - decay) * p[i];
  }
}

TrainState::TrainState(const ModelConfig& cfg) : params(), model(cfg, params) {}

ParamSet TrainState::ema_params() const {
  ParamSet out = params;
  for (std::size_t t = 0; t < out.count(); ++t) out[t] = ema[t];
  out.bump_version();
  return out;
}

ParamSet TrainState::best_params() const {
  if (best_ema.empty()) throw InvalidState("no best checkpoint recorded yet");
  ParamSet out = params;
  for (std::size_t t = 0; t < out.count(); ++t) out[t] = best_ema[t];
  out.bump_version();
  return out;
}

bool optimizer_step(TrainState& state, const Gradients& grads, const TrainConfig& cfg, std::int64_t step,
                    std::int64_t steps_per_epoch) {
  const double lr = learning_rate(step, steps_per_epoch, cfg);
  if (adamw_update(state.params, state.adam, grads, lr, cfg.weight_decay)) return true;
  state.incidents.push_back("epoch " + std::to_string(state.epoch + 1) + " step " + std::to_string(step) +
                            ": non-finite gradient, update skipped");
  return false;
}

std::vector<TrainSample> plain_batch(std::span<const LabeledImage> items, int num_classes) {
  std::vector<TrainSample> out;
  out.reserve(items.size());
  for (const LabeledImage& it : items) {
    out.push_back({it.image, encode_hard(it.grade, num_classes), it.image.source_id});
  }
  return out;
}

std::vector<TrainSample> prepare_batch(std::span<const LabeledImage> items, std::span<const std::size_t> indices,
                                       const TrainConfig& cfg, int epoch, std::int64_t step) {
  const std::size_t b = indices.size();
  const Rng root(cfg.seed);
  const Rng aug_root = root.split(kAugmentStream).split(static_cast<std::uint64_t>(epoch));
  std::vector<MixedSample> samples(b);

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < b; ++i) {
    const LabeledImage& it = items[indices[i]];
    Image img = it.image;
    if (cfg.augment_enabled) {
      Rng r = aug_root.split(indices[i]);
      img = apply_photometric(img, cfg.augment, r);
    }
    samples[i] = make_sample(std::move(img), it.grade, cfg.num_classes);
    samples[i].image.source_id = it.image.source_id;
  }

  Rng mix = root.split(kMixStream).split(static_cast<std::uint64_t>(step));
  if (cfg.augment_enabled && b >= 2 && mix.bernoulli(cfg.augment.mix_prob)) {
    const bool use_mixup = mix.bernoulli(0.5);
    const std::size_t offset = static_cast<std::size_t>(mix.uniform_int(1, static_cast<int>(b) - 1));
    const Rng draw = mix.split(1);
    std::vector<MixedSample> mixed(b);
    for (std::size_t i = 0; i < b; ++i) {
      Rng r = draw;
      const MixedSample& partner = samples[(i + offset) % b];
      mixed[i] = use_mixup ? mixup(samples[i], partner, cfg.augment.mixup_alpha, r)
                           : cutmix(samples[i], partner, cfg.augment.cutmix_alpha, r);
    }
    samples = std::move(mixed);
  }

  std::vector<TrainSample> out;
  out.reserve(b);
  for (MixedSample& s : samples) {
    out.push_back({std::move(s.image), encode_soft(s.class_target), {}});
    out.back().id = out.back().image.source_id;
  }
  return out;
}

BatchResult forward_backward(const Model& model, const ParamSet& params, std::span<const TrainSample> batch,
                             const TrainConfig& cfg, double t_epoch, Gradients* grads, const Rng* dropout_key,
                             Workspace* ws) {
  const std::size_t b = batch.size();
  if (b == 0) throw InvalidInput("empty batch");
  Workspace local;
  Workspace& w = ws ? *ws : local;
  if (w.caches.size() < b) w.caches.resize(b);

  BatchResult res;
  res.outputs.resize(b);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < b; ++i) {
    Rng drop = dropout_key ? dropout_key->split(i) : Rng(0);
    res.outputs[i] = model.forward(batch[i].image, params, grads ? &w.caches[i] : nullptr,
                                   dropout_key ? &drop : nullptr);
  }

  std::vector<OrdinalTargets> targets;
  targets.reserve(b);
  for (const TrainSample& s : batch) targets.push_back(s.targets);
  std::vector<ModelUpstream> upstream;
  res.loss = total_loss(res.outputs, targets, t_epoch, cfg, grads ? &upstream : nullptr);
  if (!grads) return res;

  if (w.per_sample.size() < b) w.per_sample.resize(b);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < b; ++i) {
    Gradients& g = w.per_sample[i];
    if (g.size() != params.count()) g = params.zeros_like();
    else zero_gradients(g);
    model.backward(upstream[i], w.caches[i], params, g);
  }
  if (grads->size() != params.count()) *grads = params.zeros_like();
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < grads->size(); ++t) (*grads)[t].add_scaled(w.per_sample[i][t]);
  }
  return res;
}

EvalResult evaluate(const Model& model, const ParamSet& params, std::span<const LabeledImage> items, bool tta,
                    Readout readout) {
  if (items.empty()) throw InvalidInput("cannot evaluate an empty split");
  const int k = model.config().num_classes;
  std::vector<SampleLog> logs(items.size());

#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Image& base = items[i].image;
    std::vector<Image> views;
    views.push_back(base);
    if (tta) {
      views.push_back(flip_horizontal(base));
      views.push_back(flip_vertical(base));
      views.push_back(flip_vertical(views[1]));
    }
    SampleLog& log = logs[i];
    log.id = base.source_id;
    log.true_grade = items[i].grade;
    log.probs.assign(k, 0.0);
    log.pi_hat.assign(k - 1, 0.0);
    log.strength.assign(k - 1, 0.0);
    const double inv_v = 1.0 / static_cast<double>(views.size());
    for (const Image& v : views) {
      const ModelOutput out = model.forward(v, params);
      for (int c = 0; c < k; ++c) log.probs[c] += out.probs.p[c] * inv_v;
      for (int t = 0; t < k - 1; ++t) {
        log.pi_hat[t] += out.evidential.pi_hat[t] * inv_v;
        log.strength[t] += out.evidential.strength[t] * inv_v;
      }
      log.u_mean += out.evidential.u_mean * inv_v;
    }
    log.pred_grade = readout == Readout::kArgmax ? predict_grade(log.probs) : threshold_count_grade(log.pi_hat);
  }

  EvalResult res;
  const std::vector<double> thresholds = default_triage_thresholds();
  res.report = build_report(logs, k, thresholds);
  res.logs = std::move(logs);
  return res;
}

std::string history_csv_header() {
  return "epoch,train_loss,L_EDL,L_div,L_lb,L_spent,val_acc,val_qwk,val_u_mean,lr,lambda";
}

std::string history_csv_row(const HistoryRow& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << r.epoch << ',' << r.train_loss << ',' << r.edl << ',' << r.div << ',' << r.lb << ',' << r.spent << ','
     << r.val_acc << ',' << r.val_qwk << ',' << r.val_u_mean << ',' << r.lr << ',' << r.lambda;
  return os.str();
}

std::string history_csv(std::span<const HistoryRow> rows) {
  std::string out = history_csv_header() + '\n';
  for (const HistoryRow& r : rows) out += history_csv_row(r) + '\n';
  return out;
}

double mean_query_cosine(const Model& model, const ParamSet& params, std::span<const LabeledImage> items) {
  if (items.empty()) throw InvalidInput("mean_query_cosine needs at least one item");
  std::vector<double> per(items.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < items.size(); ++s) {
    const Tensor q = model.forward(items[s].image, params).attention.final_queries;
    const std::size_t n = q.rows(), d = q.cols();
    std::vector<double> norm(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) norm[i] += q(i, j) * q(i, j);
      norm[i] = std::sqrt(norm[i]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        if (i == k || norm[i] == 0.0 || norm[k] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += q(i, j) * q(k, j);
        sum += dot / (norm[i] * norm[k]);
      }
    }
    per[s] = n > 1 ? sum / static_cast<double>(n * (n - 1)) : 1.0;
  }
  return std::accumulate(per.begin(), per.end(), 0.0) / static_cast<double>(per.size());
}

double dataset_load_balance(const Model& model, const ParamSet& params, std::span<const LabeledImage> items) {
  if (items.empty()) throw InvalidInput("dataset_load_balance needs at least one item");
  const std::size_t n = static_cast<std::size_t>(model.config().lqap.num_queries);
  Tensor w = Tensor::matrix(items.size(), n);
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < items.size(); ++s) {
    const auto weights = model.forward(items[s].image, params).attention.weights;
    std::copy(weights.begin(), weights.end(), w.row(s).begin());
  }
  return load_balance_loss(w);
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& cfg,
                     const std::vector<Tensor>& model_weights) {
  TensorArchive ar;
  nlohmann::ordered_json meta;
  meta["format"] = "lqe-checkpoint";
  meta["config"] = dump_config(cfg);
  meta["epoch"] = state.epoch;
  meta["step"] = state.step;
  meta["adam_steps"] = state.adam.steps;
  meta["ema_updates"] = state.ema_updates;
  meta["best_val_qwk"] = std::isfinite(state.best_val_qwk) ? state.best_val_qwk : 0.0;
  meta["best_epoch"] = state.best_epoch;
  ar.metadata = meta.dump();
  append_tensors(ar, "model/", state.params, model_weights);
  append_params(ar, "raw/", state.params);
  if (!state.adam.m.empty()) {
    append_tensors(ar, "adam_m/", state.params, state.adam.m);
    append_tensors(ar, "adam_v/", state.params, state.adam.v);
  }
  save_archive(path, ar);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  const TensorArchive ar = load_archive(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ar.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint metadata is not valid JSON: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "lqe-checkpoint") throw IoError("not an lqe checkpoint: " + path.string());
  TrainConfig cfg = parse_config(meta.at("config").get<std::string>());
  LoadedModel out{cfg, TrainState(cfg.model_config()), meta.value("epoch", 0), meta.value("best_val_qwk", 0.0)};
  restore_params(ar, "model/", out.state.params);
  out.state.params.bump_version();
  out.state.ema.clear();
  for (std::size_t t = 0; t < out.state.params.count(); ++t) out.state.ema.push_back(out.state.params[t]);
  out.state.epoch = out.epoch;
  out.state.best_val_qwk = out.best_val_qwk;
  return out;
}

Dataset dataset_for(const TrainConfig& cfg) {
  if (!cfg.data_dir.empty()) {
    IngestOptions opts;
    opts.side = cfg.input_side;
    return load_dataset(cfg.data_dir, cfg.num_classes, opts);
  }
  SyntheticSpec spec = cfg.synthetic;
  spec.num_classes = cfg.num_classes;
  spec.seed = cfg.seed;
  spec.side = cfg.input_side;
  return make_synthetic(spec);
}

bool record_validation(TrainState& state, double val_qwk, int epoch) {
  if (val_qwk > state.best_val_qwk) {
    state.best_val_qwk = val_qwk;
    state.best_epoch = epoch;
    state.patience_counter = 0;
    return true;
  }
  ++state.patience_counter;
  return false;
}

bool should_stop_early(const TrainState& state, const TrainConfig& cfg) {
  return state.patience_counter >= cfg.early_stop_patience;
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& opts) {
  cfg.validate();
  if (data.train.empty()) throw InvalidInput("training split is empty");
  if (data.val.empty()) throw InvalidInput("validation split is empty");
  if (data.num_classes != cfg.num_classes) throw InvalidInput("dataset class count differs from config");

  TrainResult res{TrainState(cfg.model_config()), {}, false};
  TrainState& st = res.state;
  st.model.initialize(st.params, Rng(cfg.seed).split(kInitStream).key());
  st.ema.clear();
  for (std::size_t t = 0; t < st.params.count(); ++t) st.ema.push_back(st.params[t]);

  const Rng root(cfg.seed);
  const std::size_t n_train = data.train.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::int64_t steps_per_epoch = static_cast<std::int64_t>((n_train + bs - 1) / bs);
  if (opts.max_steps_per_epoch > 0) steps_per_epoch = std::min<std::int64_t>(steps_per_epoch, opts.max_steps_per_epoch);

  if (!opts.output_dir.empty()) std::filesystem::create_directories(opts.output_dir);
  std::ofstream history_file;
  if (!opts.output_dir.empty()) {
    history_file.open(opts.output_dir / "history.csv");
    if (!history_file) throw IoError("cannot write history.csv in " + opts.output_dir.string());
    history_file << history_csv_header() << '\n';
  }

  Workspace ws;
  Gradients grads = st.params.zeros_like();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.temperature_end > 0.0) {
      const double f = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
      st.model.set_temperature(cfg.temperature + f * (cfg.temperature_end - cfg.temperature));
    }
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = root.split(kShuffleStream).split(static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);

    HistoryRow row;
    row.epoch = epoch + 1;
    double lr = 0.0;
    for (std::int64_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t lo = static_cast<std::size_t>(s) * bs;
      const std::size_t hi = std::min(n_train, lo + bs);
      const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      const std::vector<TrainSample> batch = prepare_batch(data.train, idx, cfg, epoch, st.step);

      const double t_epoch = epoch + static_cast<double>(s) / static_cast<double>(steps_per_epoch);
      const Rng drop_key = root.split(kDropoutStream).split(static_cast<std::uint64_t>(st.step));
      zero_gradients(grads);
      const BatchResult br =
          forward_backward(st.model, st.params, batch, cfg, t_epoch, &grads, &drop_key, &ws);

      lr = learning_rate(st.step, steps_per_epoch, cfg);
      if (!std::isfinite(br.loss.total) || !optimizer_step(st, grads, cfg, st.step, steps_per_epoch)) {
        if (!std::isfinite(br.loss.total)) {
          st.incidents.push_back("epoch " + std::to_string(epoch + 1) + " step " + std::to_string(st.step) +
                                 ": non-finite loss, update skipped");
        }
        ++row.skipped_steps;
      } else {
        const double n = static_cast<double>(st.ema_updates);
        const double decay = cfg.ema_warmup ? std::min(cfg.ema_decay, (1.0 + n) / (10.0 + n)) : cfg.ema_decay;
        ema_update(st.ema, st.params, decay);
        ++st.ema_updates;
      }
      ++st.step;

      const double inv = 1.0 / static_cast<double>(steps_per_epoch);
      row.train_loss += br.loss.total * inv;
      row.edl += br.loss.edl * inv;
      row.div += br.loss.div * inv;
      row.lb += br.loss.lb * inv;
      row.spent += br.loss.spent * inv;
      row.kl_term += br.loss.kl_term * inv;
      row.lambda = br.loss.lambda;
    }
    row.lr = lr;
    st.epoch = epoch + 1;

    const ParamSet ema = st.ema_params();
    const EvalResult val = evaluate(st.model, ema, data.val, cfg.val_tta, cfg.readout);
    row.val_acc = val.report.accuracy;
    row.val_qwk = val.report.qwk;
    row.val_u_mean = val.report.u_mean_overall;

    if (record_validation(st, row.val_qwk, epoch + 1)) {
      st.best_ema = st.ema;
      if (!opts.output_dir.empty()) {
        st.best_checkpoint_path = (opts.output_dir / "best.ckpt").string();
        save_checkpoint(st.best_checkpoint_path, st, cfg, st.ema);
      }
    }
    row.best_val_qwk = st.best_val_qwk;
    res.history.push_back(row);
    if (history_file) history_file << history_csv_row(row) << '\n' << std::flush;
    if (opts.on_epoch) opts.on_epoch(row, st);

    if (should_stop_early(st, cfg)) {
      res.early_stopped = true;
      break;
    }
    if (opts.stop_after_epochs > 0 && epoch + 1 >= opts.stop_after_epochs) break;
  }
  if (!opts.output_dir.empty()) save_checkpoint(opts.output_dir / "last.ckpt", st, cfg, st.ema);
  return res;
}

}  // namespace lqe
