#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "lqe/checkpoint.hpp"
#include "lqe/error.hpp"
#include "lqe/synthetic.hpp"
#include "lqe/trainer.hpp"

using namespace lqe;
using lqe::testing::tiny_config;

namespace {

struct Outputs {
  std::vector<ModelOutput> outputs;
  std::vector<OrdinalTargets> targets;
};

Outputs tiny_outputs(const TrainConfig& cfg) {
  ParamSet params;
  const Model model(cfg.model_config(), params);
  model.initialize(params, 7);
  Rng rng(3);
  Outputs o;
  for (int i = 0; i < 4; ++i) {
    o.outputs.push_back(model.forward(lqe::testing::random_image(cfg.input_side, cfg.input_side, 3, rng), params));
    o.targets.push_back(encode_hard(i, cfg.num_classes));
  }
  return o;
}

double adam_quadratic(double start, double target, int steps, double lr) {
  ParamSet p;
  const std::size_t x = p.add("x", {1});
  p[x][0] = start;
  AdamState opt;
  Gradients g = p.zeros_like();
  for (int s = 0; s < steps; ++s) {
    g[x][0] = 2.0 * (p[x][0] - target);
    adamw_update(p, opt, g, lr, 0.0);
  }
  return p[x][0];
}

}  // namespace

TEST_CASE("total loss bookkeeping") {
  TrainConfig cfg = tiny_config();
  cfg.entropy_penalty = true;
  const Outputs o = tiny_outputs(cfg);

  const LossBreakdown full = total_loss(o.outputs, o.targets, 3.0, cfg);
  CHECK(full.edl >= 0.0);
  CHECK(full.div >= 0.0);
  CHECK(full.lb >= 0.0);
  CHECK(full.spent >= 0.0);
  CHECK(std::abs(full.edl + full.div_contribution() + full.lb_contribution() + full.spent_contribution() - full.total) <
        1e-12);

  TrainConfig bare = cfg;
  bare.beta = bare.gamma = bare.eta = 0.0;
  const LossBreakdown plain = total_loss(o.outputs, o.targets, 3.0, bare);
  CHECK(plain.total == plain.edl);
  double edl = 0.0;
  for (std::size_t i = 0; i < o.outputs.size(); ++i) {
    edl += edl_loss(o.outputs[i].evidential, o.targets[i], 3.0, AnnealSchedule{cfg.lambda_max, cfg.t_anneal}).total;
  }
  CHECK(plain.edl == doctest::Approx(edl / 4.0).epsilon(1e-14));

  TrainConfig doubled = cfg;
  doubled.beta *= 2.0;
  const LossBreakdown twice = total_loss(o.outputs, o.targets, 3.0, doubled);
  CHECK(twice.div_contribution() == doctest::Approx(2.0 * full.div_contribution()).epsilon(1e-14));
  CHECK(twice.edl == full.edl);
  CHECK(twice.lb_contribution() == full.lb_contribution());
  CHECK(twice.spent_contribution() == full.spent_contribution());

  TrainConfig no_spent = cfg;
  no_spent.entropy_penalty = false;
  CHECK(total_loss(o.outputs, o.targets, 3.0, no_spent).spent_contribution() == 0.0);
}

TEST_CASE("learning-rate schedule endpoints") {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.warmup_epochs = 2.0;
  const std::int64_t spe = 7;
  CHECK(learning_rate(0, spe, cfg) == 0.0);
  CHECK(learning_rate(2 * spe, spe, cfg) == doctest::Approx(cfg.lr).epsilon(1e-12));
  CHECK(learning_rate(10 * spe - 1, spe, cfg) == doctest::Approx(0.01 * cfg.lr).epsilon(1e-9));
  double prev = -1.0;
  for (std::int64_t s = 0; s <= 2 * spe; ++s) {
    CHECK(learning_rate(s, spe, cfg) > prev);
    prev = learning_rate(s, spe, cfg);
  }
  for (std::int64_t s = 2 * spe + 1; s < 10 * spe; ++s) {
    CHECK(learning_rate(s, spe, cfg) <= prev);
    prev = learning_rate(s, spe, cfg);
  }
}

TEST_CASE("AdamW fixed point and non-finite gradients") {
  ParamSet p;
  const std::size_t w = p.add("w", {3, 2});
  Rng rng(1);
  for (double& v : p[w].values()) v = rng.normal();
  const Tensor before = p[w];
  AdamState opt;
  Gradients g = p.zeros_like();
  for (int s = 0; s < 5; ++s) CHECK(adamw_update(p, opt, g, 1e-2, 0.0));
  CHECK(p[w] == before);

  g[w][0] = std::nan("");
  CHECK_FALSE(adamw_update(p, opt, g, 1e-2, 0.0));
  CHECK(p[w] == before);

  g[w].fill(0.0);
  adamw_update(p, opt, g, 1e-2, 0.5);
  CHECK(std::abs(p[w][0]) < std::abs(before[0]));
}

TEST_CASE("AdamW minimizes a one-parameter quadratic at the default rate") {
  const TrainConfig cfg;
  // Adam moves at most about lr per step, so a minimum 0.05 away needs a few hundred steps.
  const double x = adam_quadratic(0.0, 0.05, 1000, cfg.lr);
  CHECK(std::abs(x - 0.05) < 1e-6);
  const double far = adam_quadratic(1.0, -0.5, 4000, 3e-3);
  CHECK(std::abs(far + 0.5) < 2e-2);
}

TEST_CASE("EMA recursion") {
  ParamSet p;
  const std::size_t w = p.add("w", {4});
  Rng rng(2);
  for (double& v : p[w].values()) v = rng.normal();
  std::vector<Tensor> shadow{Tensor({4}, {1, -1, 2, 0.5})};
  const Tensor s0 = shadow[0];

  std::vector<Tensor> copy = shadow;
  ema_update(copy, p, 0.0);
  CHECK(copy[0] == p[w]);

  const double d = 0.9;
  const int n = 25;
  for (int i = 0; i < n; ++i) ema_update(shadow, p, d);
  const double dn = std::pow(d, n);
  for (std::size_t i = 0; i < 4; ++i) CHECK(shadow[0][i] == doctest::Approx(dn * s0[i] + (1 - dn) * p[w][i]).epsilon(1e-12));
}

TEST_CASE("validation bookkeeping and early stopping") {
  TrainConfig cfg = tiny_config();
  cfg.early_stop_patience = 1;
  TrainState st(cfg.model_config());
  const double scores[] = {0.9, 0.8, 0.7, 0.6};
  int evaluated = 0;
  for (double q : scores) {
    ++evaluated;
    record_validation(st, q, evaluated);
    if (should_stop_early(st, cfg)) break;
  }
  CHECK(evaluated == 2);
  CHECK(st.best_val_qwk == 0.9);
  CHECK(st.best_epoch == 1);

  TrainState again(cfg.model_config());
  CHECK(record_validation(again, 0.1, 1));
  CHECK_FALSE(record_validation(again, 0.1, 2));
  CHECK(record_validation(again, 0.2, 3));
  CHECK(again.patience_counter == 0);
}

TEST_CASE("training stops at the first epoch that fails to improve when patience is one") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 8;
  cfg.early_stop_patience = 1;
  const Dataset data = dataset_for(cfg);
  const TrainResult res = train(cfg, data);
  std::size_t expected = res.history.size();
  for (std::size_t i = 1; i < res.history.size(); ++i) {
    if (!(res.history[i].val_qwk > res.history[i - 1].best_val_qwk)) {
      expected = i + 1;
      break;
    }
  }
  CHECK(res.history.size() == expected);
  CHECK(res.early_stopped == (expected < 8));
}

TEST_CASE("training is reproducible and keeps a monotone best score") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 3;
  const Dataset data = dataset_for(cfg);
  lqe::testing::TempDir dir("lqe_train");
  TrainOptions opts;
  opts.output_dir = dir.path();
  const TrainResult a = train(cfg, data, opts);
  const TrainResult b = train(cfg, data);
  CHECK(a.history == b.history);
  REQUIRE(a.history.size() == 3);
  for (std::size_t i = 1; i < a.history.size(); ++i) CHECK(a.history[i].best_val_qwk >= a.history[i - 1].best_val_qwk);
  for (const HistoryRow& r : a.history) {
    CHECK(std::isfinite(r.train_loss));
    CHECK(r.skipped_steps == 0);
  }

  const LoadedModel best = load_checkpoint(dir.path() / "best.ckpt");
  CHECK(best.best_val_qwk == a.state.best_val_qwk);
  const EvalResult re = evaluate(best.state.model, best.state.params, data.val, cfg.val_tta, cfg.readout);
  CHECK(re.report.qwk == a.state.best_val_qwk);
  CHECK(std::filesystem::exists(dir.path() / "last.ckpt"));
  CHECK(std::filesystem::exists(dir.path() / "history.csv"));
}

TEST_CASE("stop_after_epochs keeps the schedule of the full budget") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 4;
  const Dataset data = dataset_for(cfg);
  TrainOptions opts;
  opts.stop_after_epochs = 2;
  const TrainResult cut = train(cfg, data, opts);
  const TrainResult full = train(cfg, data);
  REQUIRE(cut.history.size() == 2);
  CHECK(cut.history[0] == full.history[0]);
  CHECK(cut.history[1] == full.history[1]);
}

TEST_CASE("a 32-sample batch is overfit within 50 steps") {
  TrainConfig cfg;
  cfg.input_side = 32;
  cfg.synthetic.blob_radius_min = 1.2;
  cfg.synthetic.blob_radius_max = 1.6;
  cfg.synthetic.images_per_grade = 10;
  cfg.lr = 1e-3;
  cfg.beta = cfg.gamma = cfg.lambda_max = 0.0;
  cfg.query_dropout = 0.0;
  const Dataset data = dataset_for(cfg);
  const std::vector<LabeledImage> items(data.train.begin(), data.train.begin() + 32);
  const std::vector<TrainSample> batch = plain_batch(items, cfg.num_classes);

  TrainState st(cfg.model_config());
  st.model.initialize(st.params, 1);
  Gradients g = st.params.zeros_like();
  Workspace ws;
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    zero_gradients(g);
    const BatchResult r = forward_backward(st.model, st.params, batch, cfg, 5.0, &g, nullptr, &ws);
    if (step == 0) first = r.loss.total;
    last = r.loss.total;
    REQUIRE(adamw_update(st.params, st.adam, g, cfg.lr, cfg.weight_decay));
  }
  INFO("loss " << first << " -> " << last);
  CHECK(last <= 0.5 * first);
}

TEST_CASE("end-to-end gradient through the whole model") {
  const auto r = lqe::testing::gradcheck_end_to_end(11);
  INFO("max rel error " << r.max_relative_error << " over " << r.coordinates);
  CHECK(r.coordinates >= 20);
  CHECK(r.passed(1e-3));
}

TEST_CASE("workspace reuse does not change the gradient") {
  const TrainConfig cfg = tiny_config();
  const Dataset data = dataset_for(cfg);
  const std::vector<LabeledImage> items(data.train.begin(), data.train.begin() + 6);
  const auto batch = plain_batch(items, cfg.num_classes);
  ParamSet params;
  const Model model(cfg.model_config(), params);
  model.initialize(params, 3);
  Gradients a = params.zeros_like(), b = params.zeros_like();
  Workspace ws;
  forward_backward(model, params, batch, cfg, 1.0, &b, nullptr, &ws);
  zero_gradients(b);
  const BatchResult rb = forward_backward(model, params, batch, cfg, 1.0, &b, nullptr, &ws);
  const BatchResult ra = forward_backward(model, params, batch, cfg, 1.0, &a);
  CHECK(ra.loss.total == rb.loss.total);
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t] == b[t]);
}

TEST_CASE("evaluation with and without flips") {
  const TrainConfig cfg = tiny_config();
  ParamSet params;
  const Model model(cfg.model_config(), params);
  model.initialize(params, 5);

  Rng rng(4);
  Image quarter = lqe::testing::random_image(16, 16, 3, rng);
  Image sym(32, 32, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) sym.at(y, x, c) = quarter.at(std::min(y, 31 - y), std::min(x, 31 - x), c);
  std::vector<LabeledImage> items{{sym, 2, -1}, {lqe::testing::random_image(32, 32, 3, rng), 1, -1}};

  const EvalResult plain = evaluate(model, params, items, false);
  const EvalResult tta = evaluate(model, params, items, true);
  for (std::size_t c = 0; c < 5; ++c) CHECK(tta.logs[0].probs[c] == doctest::Approx(plain.logs[0].probs[c]).epsilon(1e-12));
  CHECK(tta.logs[0].u_mean == doctest::Approx(plain.logs[0].u_mean).epsilon(1e-12));
  for (const SampleLog& l : tta.logs) CHECK(std::abs(std::accumulate(l.probs.begin(), l.probs.end(), 0.0) - 1.0) < 1e-9);

  for (std::size_t i = 0; i < items.size(); ++i) {
    const ModelOutput out = model.forward(items[i].image, params);
    CHECK(plain.logs[i].probs == out.probs.p);
    CHECK(plain.logs[i].pred_grade == out.grade);
    CHECK(plain.logs[i].u_mean == out.evidential.u_mean);
  }
  CHECK(plain.report.num_samples == 2);
}

TEST_CASE("batch preparation is deterministic and keeps targets normalized") {
  TrainConfig cfg = tiny_config();
  cfg.augment.mix_prob = 1.0;
  const Dataset data = dataset_for(cfg);
  const std::vector<std::size_t> idx{0, 3, 5, 7, 9, 11};
  for (std::int64_t step = 0; step < 6; ++step) {
    const auto a = prepare_batch(data.train, idx, cfg, 0, step);
    const auto b = prepare_batch(data.train, idx, cfg, 0, step);
    REQUIRE(a.size() == idx.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image.pixels == b[i].image.pixels);
      CHECK(a[i].targets.t == b[i].targets.t);
      for (std::size_t k = 0; k + 1 < a[i].targets.t.size(); ++k) CHECK(a[i].targets.t[k] >= a[i].targets.t[k + 1] - 1e-12);
    }
  }
}

TEST_CASE("query statistics helpers") {
  const TrainConfig cfg = tiny_config();
  const Dataset data = dataset_for(cfg);
  ParamSet params;
  const Model model(cfg.model_config(), params);
  model.initialize(params, 5);
  const double cos = mean_query_cosine(model, params, data.val);
  CHECK(cos >= -1.0);
  CHECK(cos <= 1.0);
  CHECK(dataset_load_balance(model, params, data.val) >= 0.0);
}

TEST_CASE("checkpoints round-trip parameters and configuration") {
  TrainConfig cfg = tiny_config();
  cfg.beta = 0.25;
  TrainState st(cfg.model_config());
  st.model.initialize(st.params, 9);
  st.ema.clear();
  for (std::size_t t = 0; t < st.params.count(); ++t) st.ema.push_back(st.params[t]);
  lqe::testing::TempDir dir("lqe_ckpt");
  save_checkpoint(dir / "m.ckpt", st, cfg, st.ema);
  const LoadedModel lm = load_checkpoint(dir / "m.ckpt");
  CHECK(lm.config.beta == 0.25);
  CHECK(dump_config(lm.config) == dump_config(cfg));
  for (std::size_t t = 0; t < st.params.count(); ++t) CHECK(lm.state.params[t] == st.params[t]);

  lqe::testing::write_text_file(dir / "bad.ckpt", "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), IoError);
}

TEST_CASE("training rejects empty splits") {
  const TrainConfig cfg = tiny_config();
  Dataset data = dataset_for(cfg);
  data.val.clear();
  CHECK_THROWS_AS(train(cfg, data), InvalidInput);
}

TEST_CASE("synthetic generator honours the grade ranges") {
  SyntheticSpec spec;
  spec.side = 32;
  spec.images_per_grade = 200;
  spec.blob_radius_min = 1.2;
  spec.blob_radius_max = 1.6;
  const Dataset ds = make_synthetic(spec);
  CHECK(ds.size() == 1000);
  CHECK(ds.train.size() == 700);
  CHECK(ds.val.size() == 150);
  std::vector<double> sum(5, 0.0);
  std::vector<int> n(5, 0);
  for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
    for (const LabeledImage& item : *split) {
      const auto [lo, hi] = spec.blob_counts[static_cast<std::size_t>(item.grade)];
      CHECK(item.blob_count >= lo);
      CHECK(item.blob_count <= hi);
      if (item.grade == 0) CHECK(item.blob_count == 0);
      sum[static_cast<std::size_t>(item.grade)] += item.blob_count;
      ++n[static_cast<std::size_t>(item.grade)];
    }
  }
  for (int g = 1; g < 5; ++g) CHECK(sum[g] / n[g] > sum[g - 1] / n[g - 1]);

  Rng r1(5), r2(5);
  CHECK(render_synthetic(spec, 4, r1) == render_synthetic(spec, 4, r2));
  CHECK(make_synthetic(spec).train[17].image == ds.train[17].image);

  SyntheticSpec bad = spec;
  bad.blob_counts[2] = {1, 2};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  CHECK(default_blob_counts(5) == spec.blob_counts);
}
