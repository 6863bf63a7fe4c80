#include "radial/continual.hpp"

#include <stdexcept>
#include <string>

#include "radial/snapshot.hpp"
#include "radial/train.hpp"

namespace radial {

std::vector<ContinualTask> make_continual_tasks(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.data.val_fraction = 0.0;
  const TrainData data = make_train_data(c);
  const bool local = cfg.head_mode == HeadMode::multi;
  TaskSequence seq = split_tasks(data.train, data.test, cfg.classes_per_task, local);
  Rng rng = Rng(cfg.seed).split("continual-val");
  std::vector<ContinualTask> out;
  for (std::size_t t = 0; t < seq.tasks.size(); ++t) {
    Task& task = seq.tasks[t];
    ContinualTask ct;
    ct.classes = task.classes;
    Rng split = rng.split(t);
    if (cfg.data.val_fraction > 0.0) {
      auto tv = split_validation(task.train, cfg.data.val_fraction, split);
      ct.train = std::move(tv.train);
      ct.val = std::move(tv.val);
    } else {
      ct.train = task.train;
      ct.val = task.train;
    }
    ct.test = std::move(task.test);
    out.push_back(std::move(ct));
  }
  return out;
}

ContinualResult continual_learning_run(const ExperimentConfig& cfg, const std::vector<ContinualTask>& tasks) {
  cfg.validate();
  if (tasks.empty()) throw std::invalid_argument("continual_learning_run: no tasks");
  const bool multi = cfg.head_mode == HeadMode::multi;
  const std::size_t n_tasks = tasks.size();
  const std::size_t out_dim = tasks.front().train.classes;
  for (const auto& t : tasks)
    if (t.train.classes != out_dim || t.train.dim != tasks.front().train.dim)
      throw std::invalid_argument("continual_learning_run: tasks disagree on shape");

  Rng base(cfg.seed);
  Rng init = base.split("init");
  VariationalNetwork net(
      architecture_for(cfg, tasks.front().train.dim, out_dim, multi ? n_tasks : 1, cfg.head_mode),
      cfg.family, cfg.rho_init, init);
  auto head_of = [&](std::size_t t) { return multi ? t : std::size_t{0}; };

  std::vector<EvalSet> eval_sets;
  for (std::size_t j = 0; j < n_tasks; ++j) eval_sets.push_back(EvalSet{&tasks[j].test, head_of(j)});

  ContinualResult result;
  std::size_t epoch_offset = 0;
  Prior prior = unit_prior(net);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    if (t > 0) {
      prior = load_prior(snapshot(net, cfg.seed), net);
      if (multi) prior.heads[t] = UnitGaussianPrior{};
    }
    TrainSession session;
    session.cfg = &cfg;
    session.prior = &prior;
    session.train = &tasks[t].train;
    session.val = tasks[t].val.size() > 0 ? &tasks[t].val : nullptr;
    session.eval_sets = eval_sets;
    session.head = head_of(t);
    session.task = t;
    session.epochs = cfg.epochs;
    session.epoch_offset = epoch_offset;
    TrainResult tr = train_network(net, session, base);
    epoch_offset += cfg.epochs;
    result.radial_prior_caveat = result.radial_prior_caveat || tr.radial_prior_caveat;
    for (auto& r : tr.records) result.records.push_back(std::move(r));

    // Accuracy on task j draws from a stream that depends on j only, so an
    // unchanged network reports unchanged accuracies.
    std::vector<std::optional<double>> row(n_tasks);
    double sum = 0.0, val_sum = 0.0;
    for (std::size_t j = 0; j <= t; ++j) {
      Rng acc_rng = base.split("acc:task" + std::to_string(j));
      row[j] = evaluate(net, tasks[j].test, head_of(j), cfg.test_samples, acc_rng).accuracy;
      sum += *row[j];
      Rng val_rng = base.split("acc-val:task" + std::to_string(j));
      const Dataset& v = tasks[j].val.size() > 0 ? tasks[j].val : tasks[j].train;
      val_sum += evaluate(net, v, head_of(j), cfg.test_samples, val_rng).accuracy;
    }
    result.accuracy.push_back(std::move(row));
    result.average.push_back(sum / static_cast<double>(t + 1));
    result.val_average.push_back(val_sum / static_cast<double>(t + 1));
  }
  return result;
}

ContinualSearch continual_grid_search(const ExperimentConfig& cfg, const std::vector<ContinualTask>& tasks) {
  ContinualSearch search;
  double best = -1.0;
  for (const ExperimentConfig& cell : expand_grid(cfg)) {
    ContinualResult r = continual_learning_run(cell, tasks);
    GridCell g{cell.epochs, cell.batch_size, cell.optimizer.lr, r.val_average.back()};
    if (g.final_val_average > best) {
      best = g.final_val_average;
      search.best = search.cells.size();
      search.result = std::move(r);
    }
    search.cells.push_back(g);
  }
  return search;
}

}  // namespace radial
