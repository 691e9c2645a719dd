// SPDX-License-Identifier: Apache-2.0
#include "daggru/trainer.hpp"

#include <cmath>
#include <numeric>

#include "daggru/rng.hpp"

namespace daggru {

void TrainConfig::validate() const {
  if (!(lr0 >= 0.0)) throw std::invalid_argument("train config: lr0 must be >= 0");
  if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("train config: patience must be >= 1");
  if (halve_every < 1) throw std::invalid_argument("train config: halve_every must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(l2 >= 0.0)) throw std::invalid_argument("train config: l2 must be >= 0");
}

double lr_at(int epoch, const TrainConfig& config) {
  if (epoch < 1) throw std::invalid_argument("lr_at: epochs are counted from 1");
  return config.lr0 * std::pow(0.5, (epoch - 1) / config.halve_every);
}

AdamState make_adam_state(const ModelParams& params) {
  AdamState s;
  for (const auto& [name, t] : params.tensors()) {
    s.m.emplace_back(t->shape());
    s.v.emplace_back(t->shape());
  }
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               double l2, const TrainConfig& config) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  if (g.size() != p.size() || state.m.size() != p.size() || state.v.size() != p.size()) {
    throw ShapeError("adam_step: parameter, gradient and state tensor counts differ");
  }
  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < p.size(); ++i) {
    Tensor& theta = *p[i].second;
    const Tensor& grad = *g[i].second;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    if (!grad.same_shape(theta) || !m.same_shape(theta) || !v.same_shape(theta)) {
      throw ShapeError("adam_step: shape mismatch for " + p[i].first + ": param " +
                       shape_string(theta.shape()) + ", grad " + shape_string(grad.shape()));
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double gj = grad[j] + l2 * theta[j];
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

TrainingDiverged::TrainingDiverged(std::uint64_t s, int e)
    : std::runtime_error("training diverged (non-finite loss) at seed " + std::to_string(s) +
                         ", epoch " + std::to_string(e)),
      seed(s),
      epoch(e) {}

PrfScore evaluate(const Checkpoint& model, const std::vector<const Sentence*>& sentences) {
  std::vector<LabelId> predicted, gold;
  for (const Sentence* s : sentences) {
    const auto labels = predict(*s, model.edges, model.params);
    predicted.insert(predicted.end(), labels.begin(), labels.end());
    for (const auto& tok : s->tokens) gold.push_back(tok.gold_label);
  }
  return micro_f1(predicted, gold);
}

namespace {

struct Example {
  const Sentence* sentence;
  DagGraph graph;
};

}  // namespace

TrainOutput train(const Corpus& corpus, const CorpusSplit& split, ModelConfig model_config,
                  const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  validate_split(corpus, split);
  if (split.train.empty()) throw std::invalid_argument("train: empty training partition");
  if (corpus.embedding_dim == 0) throw std::invalid_argument("train: corpus has no embeddings");

  Checkpoint current;
  current.labels = corpus.labels;
  current.edges = edge_type_vocab(corpus, split.train);
  model_config.input_dim = corpus.embedding_dim;
  model_config.n_labels = corpus.labels.size();
  model_config.n_edge_types = current.edges.size();
  current.params = init_params(model_config, config.seed);

  std::vector<Example> train_set;
  for (const Sentence* s : collect_sentences(corpus, split.train)) {
    train_set.push_back(Example{s, build_dags(*s, current.edges)});
  }
  const auto dev_sentences =
      collect_sentences(corpus, options.dev_is_train ? split.train : split.dev);

  Rng shuffle_rng(derive_seed(config.seed, 0x5AFF));
  Rng dropout_rng(derive_seed(config.seed, 0xD209));
  AdamState adam = make_adam_state(current.params);
  ModelParams grads = current.params.zeros_like();

  TrainOutput out;
  RunResult& result = out.result;
  result.model = options.model_name;
  result.seed = config.seed;
  result.split_id = options.split_id;
  out.best = current;
  double best_dev = -1.0;
  int since_improvement = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Tape tape;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    shuffle_rng.shuffle(order);
    double loss_total = 0.0;
    std::size_t token_total = 0;
    double grad_norm = 0.0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::size_t batch_tokens = 0;
      for (std::size_t i = start; i < end; ++i) batch_tokens += train_set[order[i]].sentence->size();
      const double scale = 1.0 / static_cast<double>(batch_tokens);

      for (auto& [name, t] : grads.tensors()) t->fill(0.0);
      for (std::size_t i = start; i < end; ++i) {
        const Example& ex = train_set[order[i]];
        tape.clear();
        const BoundParams bound = bind(tape, current.params, &grads);
        const auto logits = forward(tape, *ex.sentence, ex.graph, bound, model_config, &dropout_rng);
        const Var loss = sentence_loss(tape, logits, *ex.sentence, scale);
        const double value = tape.value(loss).item();
        if (!std::isfinite(value)) throw TrainingDiverged(config.seed, epoch);
        loss_total += value / scale;
        tape.backward(loss);
      }
      token_total += batch_tokens;

      double sq = 0.0;
      for (const auto& [name, t] : grads.tensors()) sq += squared_norm(*t);
      grad_norm = std::sqrt(sq);
      if (!std::isfinite(grad_norm)) throw TrainingDiverged(config.seed, epoch);
      adam_step(current.params, grads, adam, lr, config.l2, config);
    }

    EpochTrace trace;
    trace.epoch = epoch;
    trace.lr = lr;
    trace.train_loss = loss_total / static_cast<double>(token_total);
    if (options.on_evaluate) options.on_evaluate("dev");
    trace.dev_f1 = evaluate(current, dev_sentences).f1;
    trace.grad_norm = grad_norm;
    result.trace.push_back(trace);
    result.epochs_run = epoch;
    if (options.on_epoch) options.on_epoch(trace);

    if (trace.dev_f1 > best_dev) {
      best_dev = trace.dev_f1;
      result.best_epoch = epoch;
      out.best = current;
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      break;
    }
  }

  result.dev_f1 = best_dev;
  if (options.on_evaluate) options.on_evaluate("test");
  result.test_f1 = evaluate(out.best, collect_sentences(corpus, split.test)).f1;
  ++out.test_evaluations;
  return out;
}

}  // namespace daggru
