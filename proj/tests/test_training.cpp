#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "maint/config.hpp"
#include "maint/training.hpp"

using namespace maint;

namespace {

UserSequence make_seq(std::vector<std::size_t> items, std::vector<std::size_t> cats,
                      std::vector<std::size_t> behaviors) {
  UserSequence s;
  s.user = 1;
  for (std::size_t n = 0; n < items.size(); ++n)
    s.events.push_back({items[n], cats[n], behaviors[n],
                        n % 10, static_cast<long long>(n) * 60});
  recompute_target_positions(s, 1);
  return s;
}

ProcessedDataset small_synthetic(std::size_t n_users, double noise,
                                 std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.n_users = n_users;
  spec.n_items = 60;
  spec.n_categories = 6;
  spec.noise_fraction = noise;
  spec.seed = seed;
  auto ds = build_sequences(generate_synthetic(spec).records, "buy");
  sample_all_negatives(ds, 50, 11);
  return ds;
}

ModelConfig config_for(const ProcessedDataset& ds, std::size_t d = 8) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.aspects = 2;
  cfg.dropout_rate = 0.1;
  cfg.n_items = ds.items.size();
  cfg.n_categories = ds.categories.size();
  cfg.n_behaviors = ds.behaviors.size();
  return cfg;
}

double forward_prob(Model& model, const UserSequence& seq, std::size_t item) {
  Tape t;
  auto tr = model.forward_full(t, seq);
  return t.value(tr.item_probs)[item];
}

}  // namespace

TEST_CASE("step_targets") {
  // three buys -> two tuples with the later buys as labels
  UserSequence s = make_seq({5, 3, 7, 2, 9}, {1, 2, 3, 1, 2}, {2, 1, 1, 2, 1});
  auto tuples = step_targets(s);
  REQUIRE(tuples.size() == 2);
  CHECK(tuples[0].visible_events == 2);
  CHECK(tuples[0].visible_targets == 1);
  CHECK(tuples[0].label_item == 7);
  CHECK(tuples[0].label_category == 3);
  CHECK(tuples[1].visible_events == 4);
  CHECK(tuples[1].visible_targets == 2);
  CHECK(tuples[1].label_item == 9);
  CHECK(tuples[1].label_category == 2);

  CHECK(step_targets(make_seq({5}, {1}, {1})).empty());
  CHECK(step_targets(make_seq({5, 4}, {1, 2}, {2, 1})).empty());
}

TEST_CASE("compute_loss closed forms") {
  // uniform heads: zero the output weights; padding is masked, so the
  // distributions are uniform over 100 items and 10 categories
  ModelConfig cfg;
  cfg.d = 4;
  cfg.aspects = 1;
  cfg.dropout_rate = 0.0;
  cfg.n_items = 101;
  cfg.n_categories = 11;
  cfg.n_behaviors = 3;
  cfg.lambda = 0.0;
  Model model(cfg, 1);
  model.params().head_item.value.fill(0.0);
  model.params().head_category.value.fill(0.0);

  UserSequence s = make_seq({5, 3, 7}, {1, 2, 3}, {2, 1, 1});  // one tuple
  std::vector<const UserSequence*> batch{&s};
  std::mt19937_64 rng(1);

  Tape t;
  double loss = t.value(compute_loss(model, t, batch, false, rng)).item();
  CHECK(loss == doctest::Approx(std::log(100.0) + std::log(10.0)).epsilon(1e-9));

  // gamma = 0 removes the category term
  Model m0(cfg, 1);
  m0.config();  // same weights via same seed
  m0.params().head_item.value.fill(0.0);
  m0.params().head_category.value.fill(0.0);
  ModelConfig cfg0 = cfg;
  cfg0.gamma = 0.0;
  Model mg(cfg0, 1);
  mg.params().head_item.value.fill(0.0);
  mg.params().head_category.value.fill(0.0);
  Tape t0;
  double loss0 = t0.value(compute_loss(mg, t0, batch, false, rng)).item();
  CHECK(loss0 == doctest::Approx(std::log(100.0)).epsilon(1e-9));

  // lambda linearity
  ModelConfig cfgl = cfg;
  cfgl.lambda = 3e-4;
  Model ml(cfgl, 1);
  Tape ta, tb;
  Model ml0(cfg, 1);
  double with_l2 = ta.value(compute_loss(ml, ta, batch, false, rng)).item();
  double without = tb.value(compute_loss(ml0, tb, batch, false, rng)).item();
  CHECK(with_l2 - without ==
        doctest::Approx(3e-4 * l2_penalty_value(ml.parameters())).epsilon(1e-9));
}

TEST_CASE("untouched batch: every gradient is exactly the l2 term") {
  ProcessedDataset ds = small_synthetic(10, 0.0);
  ModelConfig cfg = config_for(ds);
  cfg.lambda = 1e-5;
  Model model(cfg, 3);

  // a single-target user contributes no tuples; the loss is pure regularizer
  UserSequence s = make_seq({5, 3}, {1, 2}, {2, 1});
  std::vector<const UserSequence*> batch{&s};
  std::mt19937_64 rng(1);
  Tape t;
  Tape::Var loss = compute_loss(model, t, batch, false, rng);
  model.zero_gradients();
  t.backward(loss);
  for (Parameter* p : model.parameters())
    for (std::size_t k = 0; k < p->value.size(); ++k)
      CHECK(p->grad[k] == 2.0 * cfg.lambda * p->value[k]);
}

TEST_CASE("train_epoch determinism and descent") {
  ProcessedDataset ds = small_synthetic(200, 0.0);
  TrainConfig tc;
  tc.batch_size = 64;
  tc.seed = 5;

  ModelConfig cfg = config_for(ds);
  Model a(cfg, 9), b(cfg, 9);
  std::vector<double> curve_a, curve_b;
  for (std::size_t e = 0; e < 2; ++e) {
    curve_a.push_back(train_epoch(a, ds.split, tc, e).mean_batch_loss);
    curve_b.push_back(train_epoch(b, ds.split, tc, e).mean_batch_loss);
  }
  CHECK(curve_a == curve_b);
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i]->value.size(); ++k)
      CHECK(pa[i]->value[k] == pb[i]->value[k]);

  // five epochs on clean planted data: loss goes down
  Model c(cfg, 9);
  double first = 0.0, last = 0.0;
  for (std::size_t e = 0; e < 5; ++e) {
    double l = train_epoch(c, ds.split, tc, e).mean_batch_loss;
    if (e == 0) first = l;
    last = l;
  }
  CHECK(last < first);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(tc.validate(), TrainingError);
  tc.learning_rate = 0.01;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), TrainingError);
  tc.batch_size = 8;
  tc.patience = 0;
  CHECK_THROWS_AS(tc.validate(), TrainingError);
}

TEST_CASE("fit keeps the best validation checkpoint") {
  ProcessedDataset ds = small_synthetic(120, 0.0);
  ModelConfig cfg = config_for(ds);
  Model model(cfg, 21);
  TrainConfig tc;
  tc.batch_size = 64;
  tc.max_epochs = 4;
  tc.patience = 2;
  tc.seed = 2;
  FitResult r = fit(model, ds.split, tc);
  REQUIRE(!r.history.empty());
  double best = 0.0;
  for (const auto& h : r.history) best = std::max(best, h.validation_hr10);
  CHECK(r.best_hr10 == best);
  CHECK(r.best.epoch == r.best_epoch);
  CHECK(r.history.size() <= tc.max_epochs);

  // the model was left holding the best parameters
  EvalReport after = evaluate(model, ds.split, {10}, EvalSet::validation);
  CHECK(after.hr_at(10) == r.best_hr10);
}

TEST_CASE("fit requires validation targets") {
  ProcessedDataset ds = small_synthetic(10, 0.0);
  for (auto& v : ds.split.validation) v.present = false;
  ModelConfig cfg = config_for(ds);
  Model model(cfg, 1);
  TrainConfig tc;
  CHECK_THROWS_AS(fit(model, ds.split, tc), TrainingError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  ProcessedDataset ds = small_synthetic(20, 0.0);
  ModelConfig cfg = config_for(ds, 4);
  Model model(cfg, 33);
  TrainConfig tc;
  tc.batch_size = 16;
  train_epoch(model, ds.split, tc, 0);  // give optimizer state nonzero values

  const UserSequence& probe = ds.split.train[0];
  const double before = forward_prob(model, probe, 3);

  auto path = std::filesystem::temp_directory_path() / "maint_ckpt_test.bin";
  Checkpoint saved = snapshot(model, tc, 7, {0.1, 0.2});
  save_checkpoint(path.string(), saved);
  Checkpoint loaded = load_checkpoint(path.string());

  CHECK(loaded.epoch == 7);
  CHECK(loaded.validation_history == std::vector<double>{0.1, 0.2});
  CHECK(loaded.model_config.d == cfg.d);
  CHECK(loaded.model_config.n_items == cfg.n_items);
  CHECK(loaded.train_config.batch_size == 16);
  REQUIRE(loaded.params.size() == saved.params.size());
  for (std::size_t i = 0; i < loaded.params.size(); ++i) {
    CHECK(loaded.params[i].name == saved.params[i].name);
    CHECK(loaded.params[i].value.shape() == saved.params[i].value.shape());
    CHECK(loaded.params[i].value.raw() == saved.params[i].value.raw());
    CHECK(loaded.params[i].adam_m.raw() == saved.params[i].adam_m.raw());
    CHECK(loaded.params[i].adam_v.raw() == saved.params[i].adam_v.raw());
    CHECK(loaded.params[i].step_count == saved.params[i].step_count);
  }

  Model fresh(loaded.model_config, 99);  // different init, then restored
  restore(fresh, loaded);
  CHECK(forward_prob(fresh, probe, 3) == before);

  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".meta");
}

TEST_CASE("checkpoint corruption is detected") {
  ProcessedDataset ds = small_synthetic(5, 0.0);
  Model model(config_for(ds, 4), 1);
  TrainConfig tc;
  auto path = std::filesystem::temp_directory_path() / "maint_ckpt_bad.bin";
  save_checkpoint(path.string(), snapshot(model, tc, 0, {}));

  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("GARBAGE!", 8);
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path.string()), CheckpointError);
  }
  SUBCASE("truncated payload") {
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size / 2);
    CHECK_THROWS_AS(load_checkpoint(path.string()), CheckpointError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/nowhere.bin"), CheckpointError);
  }
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".meta");
}

TEST_CASE("restore rejects mismatched models") {
  ProcessedDataset ds = small_synthetic(5, 0.0);
  Model model(config_for(ds, 4), 1);
  TrainConfig tc;
  Checkpoint c = snapshot(model, tc, 0, {});
  ModelConfig other = config_for(ds, 8);
  Model wrong(other, 1);
  CHECK_THROWS_AS(restore(wrong, c), CheckpointError);
}

TEST_CASE("gradient_check on the d=4 toy model") {
  ModelConfig cfg;
  cfg.d = 4;
  cfg.aspects = 2;
  cfg.dropout_rate = 0.0;
  cfg.n_items = 12;
  cfg.n_categories = 4;
  cfg.n_behaviors = 3;
  Model model(cfg, 101);
  UserSequence s = make_seq({5, 3, 7, 2, 9, 4}, {1, 2, 3, 1, 2, 3},
                            {2, 1, 2, 1, 2, 1});
  auto groups = gradient_check(model, {s});
  CHECK(groups.size() == model.parameters().size());
  for (const auto& g : groups) {
    INFO(g.name);
    CHECK(g.worst_rel_err < 1e-4);
  }
}

TEST_CASE("run configuration parsing") {
  RunConfig cfg;
  CHECK(cfg.model.d == 64);
  CHECK(cfg.model.aspects == 3);
  CHECK(cfg.model.gamma == 1.0);
  CHECK(cfg.model.lambda == 1e-5);
  CHECK(cfg.model.dropout_rate == 0.2);
  CHECK(cfg.train.learning_rate == 0.01);
  CHECK(cfg.train.batch_size == 512);

  cfg.apply("model.J", "4");
  CHECK(cfg.model.aspects == 4);
  cfg.apply_override("train.batch_size=128");
  CHECK(cfg.train.batch_size == 128);
  cfg.apply("seed", "9");
  CHECK(cfg.seed == 9);
  CHECK(cfg.train.seed == 9);
  cfg.apply("model.variant", "mgfus");
  CHECK(cfg.model.variant == Variant::concat_fusion);

  CHECK_THROWS_AS(cfg.apply("model.unknown", "1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply("model.d", "abc"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("no-equals-sign"), ConfigError);

  // echo round trip: feeding the echo back reproduces the configuration
  auto path = std::filesystem::temp_directory_path() / "maint_cfg_test.txt";
  {
    std::ofstream out(path);
    out << "# comment line\n\n" << cfg.echo();
  }
  RunConfig reread;
  reread.load_file(path.string());
  CHECK(reread.echo() == cfg.echo());
  std::filesystem::remove(path);

  CHECK_THROWS_AS(reread.load_file("/nonexistent/cfg.txt"), IoError);
}
