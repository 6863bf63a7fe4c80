#include <cmath>

#include "doctest.h"
#include "radial/continual.hpp"
#include "radial/optim.hpp"
#include "radial/train.hpp"
#include "radial/truncation.hpp"

using namespace radial;

namespace {

ExperimentConfig blob_config() {
  ExperimentConfig c;
  c.seed = 3;
  c.hidden = {16};
  c.family = PosteriorFamily::radial();
  c.rho_init = -6.0;
  c.optimizer.lr = 0.01;
  c.epochs = 50;
  c.batch_size = 32;
  c.data.kind = "blobs";
  c.data.n_train = 200;
  c.data.n_test = 100;
  c.data.classes = 2;
  c.data.dim = 2;
  c.data.spread = 0.5;
  c.data.val_fraction = 0.0;
  c.grad_std_draws = 0;
  c.test_samples = 4;
  return c;
}

ExperimentConfig cluster_config() {
  ExperimentConfig c = blob_config();
  c.data.kind = "clusters";
  c.data.classes = 10;
  c.data.dim = 8;
  c.data.spread = 0.3;
  c.data.n_train = 600;
  c.data.n_test = 300;
  c.data.val_fraction = 0.1;
  c.epochs = 4;
  c.hidden = {32};
  return c;
}

}  // namespace

TEST_CASE("radial network separates two blobs") {
  const RunOutput run = run_training(blob_config());
  CHECK(run.result.final_train_acc >= 0.95);
  CHECK(run.result.records.size() == 50);
  for (std::size_t e = 0; e < run.result.records.size(); ++e) {
    const MetricsRecord& r = run.result.records[e];
    CHECK(r.epoch == e);
    CHECK(std::abs(r.total - (r.nll + r.entropy - r.cross_entropy)) <= 1e-9 * std::max(1.0, std::abs(r.total)));
  }
}

TEST_CASE("same config and seed give an identical record stream") {
  ExperimentConfig c = blob_config();
  c.epochs = 5;
  c.grad_std_draws = 4;
  const auto a = run_training(c);
  const auto b = run_training(c);
  CHECK(metrics_csv(a.result.records, 1) == metrics_csv(b.result.records, 1));
  c.seed = 4;
  CHECK(metrics_csv(run_training(c).result.records, 1) != metrics_csv(a.result.records, 1));
}

TEST_CASE("grad-std is about zero when sigma starts near zero") {
  ExperimentConfig c = blob_config();
  c.epochs = 1;
  c.rho_init = -40.0;
  c.grad_std_draws = 4;
  const auto run = run_training(c);
  CHECK(run.result.records[0].grad_std.value() < 1e-9);
}

TEST_CASE("sigma near zero follows the deterministic MLP trajectory") {
  ExperimentConfig c = blob_config();
  c.family = PosteriorFamily::mfvi();
  c.rho_init = -40.0;
  c.epochs = 3;
  const TrainData data = make_train_data(c);
  const Rng base(c.seed);
  Rng init_a = base.split("init"), init_b = base.split("init");
  VariationalNetwork vi(architecture_for(c, 2, 2), c.family, c.rho_init, init_a);
  VariationalNetwork mlp(architecture_for(c, 2, 2), c.family, c.rho_init, init_b);

  const Prior prior = unit_prior(vi);
  TrainSession s;
  s.cfg = &c;
  s.prior = &prior;
  s.train = &data.train;
  s.epochs = c.epochs;
  s.track = false;
  Rng run_rng(c.seed);
  (void)train_network(vi, s, run_rng);

  // Plain MLP on the means: NLL plus the unit-prior weight penalty, same batches.
  Amsgrad opt(mlp.mean_parameters(0), AmsgradSpec{c.optimizer.lr, 0.9, 0.999, 1e-8});
  Rng train_rng = Rng(c.seed).split("train:task0");
  const std::size_t n = data.train.size();
  for (std::size_t e = 0; e < c.epochs; ++e) {
    const auto order = permutation(n, train_rng);
    for (std::size_t begin = 0; begin < n; begin += c.batch_size) {
      const std::size_t end = std::min(n, begin + c.batch_size);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      (void)mlp.draw_noise(train_rng, 0);  // the variational run draws here too
      const Tensor logits = mlp.forward_mean(data.train.inputs(rows), 0);
      const double b = static_cast<double>(rows.size());
      Tensor loss = nll_classification(reshape(logits, {1, logits.size(0), logits.size(1)}), data.train.labels_at(rows)) * b;
      Tensor penalty = Tensor::scalar(0.0);
      for (const Tensor& p : mlp.mean_parameters(0)) penalty = penalty + sum(square(p)) * 0.5;
      (loss + penalty * (b / static_cast<double>(n))).backward();
      opt.step();
      mlp.zero_grad();
    }
  }
  double worst = 0.0;
  const auto a = vi.mean_parameters(0), m = mlp.mean_parameters(0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].numel(); ++k) worst = std::max(worst, std::abs(a[i].data()[k] - m[i].data()[k]));
  CHECK(worst < 1e-8);
}

TEST_CASE("mismatched data is rejected before training") {
  ExperimentConfig c = blob_config();
  const TrainData data = make_train_data(c);
  Rng init(1);
  VariationalNetwork net(Architecture{3, {4}, 2, 1, HeadMode::single}, c.family, -6.0, init);
  const Prior prior = unit_prior(net);
  TrainSession s;
  s.cfg = &c;
  s.prior = &prior;
  s.train = &data.train;
  s.epochs = 1;
  Rng rng(1);
  CHECK_THROWS_AS((void)train_network(net, s, rng), std::invalid_argument);
}

TEST_CASE("early stopping restores the best validation checkpoint") {
  ExperimentConfig c = blob_config();
  c.epochs = 6;
  c.early_stopping = true;
  c.data.val_fraction = 0.2;
  const auto run = run_training(c);
  REQUIRE(run.result.best_epoch.has_value());
  CHECK(*run.result.best_epoch < 6);
}

TEST_CASE("mean pretraining leaves sigma untouched") {
  ExperimentConfig c = blob_config();
  c.epochs = 2;
  c.pretrain_epochs = 2;
  const auto run = run_training(c);
  for (const auto& layer : run.net.trunk())
    for (double rho : layer.weight_rho().data()) CHECK(rho == -6.0);
}

TEST_CASE("infinite truncation reproduces the untruncated run") {
  ExperimentConfig c = blob_config();
  c.epochs = 4;
  c.family = PosteriorFamily::mfvi();
  const auto plain = run_training(c);
  c.family = PosteriorFamily::truncated(std::numeric_limits<double>::infinity());
  const auto trunc = run_training(c);
  CHECK(metrics_csv(plain.result.records, 1) == metrics_csv(trunc.result.records, 1));
}

TEST_CASE("truncation table layout") {
  ExperimentConfig c = blob_config();
  c.epochs = 2;
  c.family = PosteriorFamily::mfvi();
  c.truncation_thresholds = {0.5};
  c.truncation_samples = {1, 2};
  c.truncation_repeats = 1;
  const TruncationTable t = train_truncated(c);
  REQUIRE(t.rows.size() == 4);
  for (const auto& r : t.rows) {
    CHECK(r.gap == doctest::Approx(r.baseline_nll - r.final_nll));
    if (std::isinf(r.threshold)) {
      CHECK(r.gap == 0.0);
      CHECK(r.acceptance == 1.0);
    } else {
      CHECK(r.acceptance == doctest::Approx(std::erf(0.5 / std::sqrt(2.0))).epsilon(1e-12));
    }
  }
  c.truncation_thresholds = {0.0};
  CHECK_THROWS((void)train_truncated(c));
}

TEST_CASE("one-task continual run equals plain training") {
  ExperimentConfig c = cluster_config();
  const auto tasks = make_continual_tasks(c);
  REQUIRE(tasks.size() == 5);
  const std::vector<ContinualTask> one{tasks[0]};
  const ContinualResult cr = continual_learning_run(c, one);

  const Rng base(c.seed);
  Rng init = base.split("init");
  VariationalNetwork net(architecture_for(c, tasks[0].train.dim, 2, 1, HeadMode::multi), c.family, c.rho_init, init);
  const Prior prior = unit_prior(net);
  TrainSession s;
  s.cfg = &c;
  s.prior = &prior;
  s.train = &tasks[0].train;
  s.val = &tasks[0].val;
  s.eval_sets = {EvalSet{&tasks[0].test, 0}};
  s.epochs = c.epochs;
  Rng rng(c.seed);
  const TrainResult tr = train_network(net, s, rng);
  CHECK(metrics_csv(cr.records, 1) == metrics_csv(tr.records, 1));
}

TEST_CASE("zero-epoch continual chain leaves accuracies unchanged") {
  for (HeadMode mode : {HeadMode::multi, HeadMode::single}) {
    ExperimentConfig c = cluster_config();
    c.head_mode = mode;
    c.epochs = 0;
    const auto tasks = make_continual_tasks(c);
    const ContinualResult r = continual_learning_run(c, tasks);
    for (std::size_t t = 1; t < tasks.size(); ++t)
      for (std::size_t j = 0; j < t; ++j) CHECK(r.accuracy[t][j].value() == r.accuracy[j][j].value());
    for (std::size_t j = 1; j < tasks.size(); ++j) CHECK_FALSE(r.accuracy[0][j].has_value());
  }
}

TEST_CASE("two identical tasks do not forget") {
  for (auto fam : {PosteriorFamily::mfvi(), PosteriorFamily::radial()}) {
    ExperimentConfig c = cluster_config();
    c.family = fam;
    c.head_mode = HeadMode::single;
    c.epochs = 10;
    c.rho_init = -4.0;
    const auto tasks = make_continual_tasks(c);
    const std::vector<ContinualTask> twice{tasks[0], tasks[0]};
    const ContinualResult r = continual_learning_run(c, twice);
    CHECK(std::abs(*r.accuracy[1][0] - *r.accuracy[0][0]) <= 0.02);
    CHECK(r.radial_prior_caveat == (fam == PosteriorFamily::radial()));
  }
}

TEST_CASE("grid search keeps the best cell and breaks ties toward the first") {
  ExperimentConfig c = cluster_config();
  c.epochs = 0;
  c.grid_lr = {0.01, 0.02};
  const auto tasks = make_continual_tasks(c);
  const ContinualSearch s = continual_grid_search(c, tasks);
  REQUIRE(s.cells.size() == 2);
  CHECK(s.cells[0].final_val_average == s.cells[1].final_val_average);
  CHECK(s.best == 0);
  c.grid_epochs = {1, 3};
  CHECK(expand_grid(c).size() == 4);
}
