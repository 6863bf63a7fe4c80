#include "radial/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "radial/grad_probe.hpp"
#include "radial/idx.hpp"
#include "radial/metrics.hpp"
#include "radial/optim.hpp"

namespace radial {

namespace {

constexpr std::size_t kEvalChunk = 2048;

std::vector<std::size_t> iota_rows(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows(end - begin);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
  return rows;
}

void copy_parameters(const VariationalNetwork& from, VariationalNetwork& to) {
  auto src = from.all_parameters();
  auto dst = to.all_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto d = dst[i].mutable_data();
    std::copy(src[i].data().begin(), src[i].data().end(), d.begin());
  }
}

Dataset generate(const DatasetSpec& spec, std::size_t n, Rng& rng) {
  if (spec.kind == "moons") return make_moons(n, spec.noise, spec.label_noise, rng);
  if (spec.kind == "blobs") return make_blobs(n, spec.classes, spec.dim, spec.spread, 2.0, rng);
  if (spec.kind == "ambiguous") return make_ambiguous_band(n, spec.band, rng).data;
  if (spec.kind == "clusters") {
    const std::size_t per_class = (n + spec.classes - 1) / spec.classes;
    return make_clusters(per_class, spec.classes, spec.dim, spec.spread, rng).head(n);
  }
  throw std::invalid_argument("unknown dataset kind '" + spec.kind + "'");
}

void check_fit(const VariationalNetwork& net, const Dataset& data, std::size_t head) {
  const auto& arch = net.architecture();
  if (data.dim != arch.input_dim)
    throw std::invalid_argument("dataset has " + std::to_string(data.dim) + " features, network expects " +
                                std::to_string(arch.input_dim));
  for (std::size_t y : data.labels)
    if (y >= arch.output_dim)
      throw std::invalid_argument("dataset label " + std::to_string(y) + " exceeds network outputs (" +
                                  std::to_string(arch.output_dim) + ")");
  net.check_head(head);
}

std::optional<double> binary_auc(const ProbSamples& probs, std::span<const std::size_t> labels) {
  if (probs.classes != 2) return std::nullopt;
  const auto mean = mean_predictive(probs);
  std::vector<double> scores(probs.batch);
  for (std::size_t b = 0; b < probs.batch; ++b) scores[b] = mean[b * 2 + 1];
  const auto pos = std::count(labels.begin(), labels.end(), std::size_t{1});
  if (pos == 0 || static_cast<std::size_t>(pos) == labels.size()) return std::nullopt;
  return roc_auc(scores, labels);
}

}  // namespace

TrainData make_train_data(const ExperimentConfig& cfg) {
  const DatasetSpec& spec = cfg.data;
  Rng rng = Rng(cfg.seed).split("data");
  Dataset train_full, test;
  if (spec.kind == "idx") {
    if (spec.idx_train_images.empty() || spec.idx_train_labels.empty() || spec.idx_test_images.empty() ||
        spec.idx_test_labels.empty())
      throw std::invalid_argument("dataset = idx needs idx_train_images/labels and idx_test_images/labels");
    train_full = load_idx_dataset(spec.idx_train_images, spec.idx_train_labels, spec.classes);
    test = load_idx_dataset(spec.idx_test_images, spec.idx_test_labels, spec.classes);
    if (spec.n_train > 0 && spec.n_train < train_full.size()) train_full = train_full.head(spec.n_train);
    if (spec.n_test > 0 && spec.n_test < test.size()) test = test.head(spec.n_test);
  } else {
    Dataset all = generate(spec, spec.n_train + spec.n_test, rng);
    const auto order = permutation(all.size(), rng);
    std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.n_train));
    std::vector<std::size_t> te(order.begin() + static_cast<std::ptrdiff_t>(spec.n_train), order.end());
    train_full = all.subset(tr);
    test = all.subset(te);
  }
  TrainData out;
  if (spec.val_fraction > 0.0) {
    auto tv = split_validation(train_full, spec.val_fraction, rng);
    out.train = std::move(tv.train);
    out.val = std::move(tv.val);
  } else {
    out.train = std::move(train_full);
    out.val = Dataset{out.train.dim, out.train.classes, {}, {}};
  }
  out.test = std::move(test);
  const Standardizer s = Standardizer::fit(out.train);
  s.apply(out.train);
  if (out.val.size() > 0) s.apply(out.val);
  s.apply(out.test);
  out.train.validate();
  out.test.validate();
  return out;
}

Architecture architecture_for(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t output_dim,
                              std::size_t heads, HeadMode mode) {
  return Architecture{input_dim, cfg.hidden, output_dim, heads, mode};
}

EvalResult evaluate(const VariationalNetwork& net, const Dataset& data, std::size_t head,
                    std::size_t samples, Rng& rng) {
  if (samples == 0) throw std::invalid_argument("evaluate: samples must be >= 1");
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  NoGradGuard no_grad;
  std::vector<NetworkNoise> noise;
  for (std::size_t s = 0; s < samples; ++s) noise.push_back(net.draw_noise(rng, head));
  std::vector<std::vector<SampledLayer>> weights;
  for (const auto& n : noise) weights.push_back(net.apply_noise(n, head));

  EvalResult out;
  const std::size_t n = data.size();
  const std::size_t k = net.architecture().output_dim;
  out.probs = ProbSamples{samples, n, k, std::vector<double>(samples * n * k)};
  for (std::size_t begin = 0; begin < n; begin += kEvalChunk) {
    const std::size_t end = std::min(n, begin + kEvalChunk);
    const auto rows = iota_rows(begin, end);
    const Tensor x = data.inputs(rows);
    for (std::size_t s = 0; s < samples; ++s) {
      const Tensor logits = net.forward_weights(x, weights[s]);
      const auto L = logits.data();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const double* z = L.data() + r * k;
        const double mx = *std::max_element(z, z + k);
        double se = 0.0;
        for (std::size_t j = 0; j < k; ++j) se += std::exp(z[j] - mx);
        const double lse = mx + std::log(se);
        out.nll_sum += (lse - z[data.labels[begin + r]]) / static_cast<double>(samples);
        double* p = out.probs.values.data() + (s * n + begin + r) * k;
        for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(z[j] - lse);
      }
    }
  }
  out.accuracy = accuracy(predicted_labels(out.probs), data.labels);
  return out;
}

TrainResult train_network(VariationalNetwork& net, const TrainSession& session, Rng& rng) {
  if (!session.cfg || !session.prior || !session.train)
    throw std::invalid_argument("train_network: session needs config, prior and training data");
  const ExperimentConfig& cfg = *session.cfg;
  const Dataset& train = *session.train;
  const std::size_t head = session.head;
  cfg.validate();
  train.validate();
  check_fit(net, train, head);
  for (const auto& es : session.eval_sets) check_fit(net, *es.data, es.head);
  session.prior->check_congruent(net);
  if (cfg.early_stopping && (!session.val || session.val->size() == 0))
    throw std::invalid_argument("train_network: early stopping needs a validation set");

  const std::string tag = "task" + std::to_string(session.task);
  Rng train_rng = rng.split("train:" + tag);
  const std::size_t n = train.size();

  ElboOptions opts;
  opts.n_samples = cfg.n_samples;
  opts.dataset_size = n;
  opts.include_constants = cfg.include_constants;
  opts.scaling = cfg.kl_scaling;

  std::unique_ptr<Optimizer> mean_opt;
  std::unique_ptr<Optimizer> full_opt;
  TrainResult result;
  result.radial_prior_caveat = session.prior->uses_radial_snapshot();

  const Dataset probe = train.head(cfg.grad_std_probe);
  const Tensor probe_x = probe.inputs();
  std::optional<VariationalNetwork> best;
  double best_val = -1.0;

  for (std::size_t e = 0; e < session.epochs; ++e) {
    const std::size_t epoch = session.epoch_offset + e;
    const bool pretrain = e < cfg.pretrain_epochs;
    Optimizer* opt = nullptr;
    if (pretrain) {
      if (!mean_opt) mean_opt = make_optimizer(cfg.optimizer, net.mean_parameters(head));
      opt = mean_opt.get();
    } else {
      if (!full_opt) full_opt = make_optimizer(cfg.optimizer, net.parameters(head));
      opt = full_opt.get();
    }

    const auto order = permutation(n, train_rng);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
      const Tensor x = train.inputs(rows);
      const auto y = train.labels_at(rows);
      Tensor loss;
      if (pretrain) {
        const Tensor logits = net.forward_mean(x, head);
        loss = nll_classification(reshape(logits, {1, logits.size(0), logits.size(1)}), y);
        if (cfg.kl_scaling == KlScaling::batch_fraction) loss = loss * static_cast<double>(y.size());
      } else {
        loss = elbo_loss(net, x, y, *session.prior, head, opts, train_rng).loss;
      }
      loss.backward();
      try {
        opt->step();
      } catch (const NonFiniteGradient&) {
        ++result.rejected_steps;
        net.zero_grad();
      }
    }
    opt->end_epoch();

    if (cfg.early_stopping && !pretrain) {
      Rng val_rng = rng.split("val:" + tag + ":" + std::to_string(epoch));
      const double acc = evaluate(net, *session.val, head, cfg.test_samples, val_rng).accuracy;
      if (acc > best_val) {
        best_val = acc;
        best = net;
        result.best_epoch = epoch;
      }
    }

    if (!session.track) continue;
    Rng eval_rng = rng.split("eval:" + tag + ":" + std::to_string(epoch));
    MetricsRecord rec;
    rec.run_id = cfg.run_id;
    rec.epoch = epoch;
    rec.task = session.task;
    const EvalResult tr = evaluate(net, train, head, cfg.train_eval_samples, eval_rng);
    rec.nll = tr.nll_sum;
    rec.train_acc = tr.accuracy;
    {
      NoGradGuard no_grad;
      std::vector<std::vector<SampledLayer>> weights;
      for (std::size_t s = 0; s < cfg.test_samples; ++s)
        weights.push_back(net.apply_noise(net.draw_noise(eval_rng, head), head));
      const KlTerms kt = kl_terms(net, *session.prior, head, weights, true);
      rec.entropy = kt.entropy.item();
      rec.cross_entropy = -kt.cross_entropy.item();
    }
    rec.total = rec.nll + rec.entropy - rec.cross_entropy;
    if (cfg.grad_std_draws >= 2)
      rec.grad_std = nll_gradient_std(net, probe_x, probe.labels, head, cfg.grad_std_draws, eval_rng);
    for (std::size_t t = 0; t < session.eval_sets.size(); ++t) {
      const EvalSet& es = session.eval_sets[t];
      const EvalResult ev = evaluate(net, *es.data, es.head, cfg.test_samples, eval_rng);
      rec.eval_acc.push_back(ev.accuracy);
      if (t == session.task) {
        rec.ece = ece(calibration_table(ev.probs, es.data->labels));
        rec.auc = binary_auc(ev.probs, es.data->labels);
      }
    }
    result.records.push_back(std::move(rec));
  }

  if (best) copy_parameters(*best, net);
  Rng final_rng = rng.split("final:" + tag);
  const EvalResult fin = evaluate(net, train, head, cfg.train_eval_samples, final_rng);
  result.final_train_acc = fin.accuracy;
  result.final_train_nll = fin.nll_sum;
  return result;
}

RunOutput run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  TrainData data = make_train_data(cfg);
  Rng base(cfg.seed);
  Rng init = base.split("init");
  VariationalNetwork net(architecture_for(cfg, data.train.dim, data.train.classes), cfg.family,
                         cfg.rho_init, init);
  Prior prior = cfg.prior == "snapshot"
                    ? load_prior(PosteriorSnapshot::load(cfg.prior_snapshot), net)
                    : unit_prior(net);
  TrainSession session;
  session.cfg = &cfg;
  session.prior = &prior;
  session.train = &data.train;
  session.val = data.val.size() > 0 ? &data.val : nullptr;
  session.eval_sets = {EvalSet{&data.test, 0}};
  session.epochs = cfg.epochs;
  TrainResult result = train_network(net, session, base);
  return RunOutput{std::move(net), std::move(data), std::move(result)};
}

std::vector<ExperimentConfig> expand_grid(const ExperimentConfig& base) {
  const std::vector<std::size_t> epochs = base.grid_epochs.empty() ? std::vector{base.epochs} : base.grid_epochs;
  const std::vector<std::size_t> batches =
      base.grid_batch_size.empty() ? std::vector{base.batch_size} : base.grid_batch_size;
  const std::vector<double> lrs = base.grid_lr.empty() ? std::vector{base.optimizer.lr} : base.grid_lr;
  std::vector<ExperimentConfig> cells;
  for (std::size_t e : epochs)
    for (std::size_t b : batches)
      for (double lr : lrs) {
        ExperimentConfig c = base;
        c.epochs = e;
        c.batch_size = b;
        c.optimizer.lr = lr;
        c.grid_epochs.clear();
        c.grid_batch_size.clear();
        c.grid_lr.clear();
        cells.push_back(std::move(c));
      }
  return cells;
}

}  // namespace radial
