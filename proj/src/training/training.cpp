#include "climatune/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "climatune/error.hpp"

namespace climatune {

namespace {

class OptimizerState {
 public:
  OptimizerState(const TrainConfig& config, const ModelConfig& model)
      : config_(config), first_(ModelParams::zeros(model)), second_(ModelParams::zeros(model)) {}

  void step(ModelParams& params, const ModelParams& grads) {
    ++steps_;
    auto p = params.tensors();
    const auto g = grads.tensors();
    auto m = first_.tensors();
    auto v = second_.tensors();
    const double lr = config_.learning_rate;
    if (config_.optimizer == Optimizer::adam) {
      const double b1 = config_.beta1, b2 = config_.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
      for (std::size_t t = 0; t < p.size(); ++t) {
        auto pv = p[t].second->values();
        const auto gv = g[t].second->values();
        auto mv = m[t].second->values();
        auto vv = v[t].second->values();
        for (std::size_t i = 0; i < pv.size(); ++i) {
          mv[i] = b1 * mv[i] + (1.0 - b1) * gv[i];
          vv[i] = b2 * vv[i] + (1.0 - b2) * gv[i] * gv[i];
          pv[i] -= lr * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + config_.adam_epsilon);
        }
      }
    } else {
      for (std::size_t t = 0; t < p.size(); ++t) {
        auto pv = p[t].second->values();
        const auto gv = g[t].second->values();
        auto mv = m[t].second->values();
        for (std::size_t i = 0; i < pv.size(); ++i) {
          mv[i] = config_.momentum * mv[i] + gv[i];
          pv[i] -= lr * mv[i];
        }
      }
    }
  }

 private:
  const TrainConfig& config_;
  ModelParams first_;
  ModelParams second_;
  std::size_t steps_ = 0;
};

void zero(ModelParams& grads) {
  for (auto& [name, m] : grads.tensors()) m->fill(0.0);
}

}  // namespace

void TrainConfig::validate() const {
  if (hidden == 0 || pitch_embed == 0 || duration_embed == 0 || sql == 0) {
    throw UsageError("model sizes (hidden, embeddings, sql) must be positive");
  }
  if (patience < 1) throw UsageError("patience must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction <= 0.5)) {
    throw UsageError("validation fraction must be in (0, 0.5]");
  }
  if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (batch_size == 0) throw UsageError("batch size must be >= 1");
  if (max_epochs == 0) throw UsageError("max epochs must be >= 1");
  if (min_delta < 0.0) throw UsageError("min_delta must be >= 0");
}

ModelConfig TrainConfig::model_config(const Vocabulary& vocab) const {
  ModelConfig c;
  c.pitch_vocab = vocab.pitch_size();
  c.duration_vocab = vocab.duration_size();
  c.pitch_embed = pitch_embed;
  c.duration_embed = duration_embed;
  c.hidden = hidden;
  c.sql = sql;
  return c;
}

double TrainHistory::best_val_loss() const {
  if (best_epoch == 0) return initial_val_loss;
  return val_loss.at(best_epoch - 1);
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"hidden", c.hidden},
          {"pitch_embed", c.pitch_embed},
          {"duration_embed", c.duration_embed},
          {"sql", c.sql},
          {"learning_rate", c.learning_rate},
          {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "momentum"},
          {"momentum", c.momentum},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"min_delta", c.min_delta},
          {"validation_fraction", c.validation_fraction},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.hidden = j.at("hidden").get<std::size_t>();
  c.pitch_embed = j.at("pitch_embed").get<std::size_t>();
  c.duration_embed = j.at("duration_embed").get<std::size_t>();
  c.sql = j.at("sql").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.optimizer = j.at("optimizer").get<std::string>() == "momentum" ? Optimizer::momentum : Optimizer::adam;
  c.momentum = j.at("momentum").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_epsilon = j.at("adam_epsilon").get<double>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.min_delta = j.at("min_delta").get<double>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json to_json(const TrainHistory& h) {
  return {{"train_loss", h.train_loss},
          {"val_loss", h.val_loss},
          {"initial_train_loss", h.initial_train_loss},
          {"initial_val_loss", h.initial_val_loss},
          {"best_epoch", h.best_epoch},
          {"best_val_loss", h.best_val_loss()},
          {"stopped_epoch", h.stopped_epoch},
          {"stopped_early", h.stopped_early}};
}

TrainHistory train_history_from_json(const nlohmann::json& j) {
  TrainHistory h;
  h.train_loss = j.at("train_loss").get<std::vector<double>>();
  h.val_loss = j.at("val_loss").get<std::vector<double>>();
  h.initial_train_loss = j.at("initial_train_loss").get<double>();
  h.initial_val_loss = j.at("initial_val_loss").get<double>();
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  h.stopped_epoch = j.at("stopped_epoch").get<std::size_t>();
  h.stopped_early = j.at("stopped_early").get<bool>();
  return h;
}

Split split_train_val(const std::vector<TrainingWindow>& windows, double fraction, std::uint64_t seed) {
  if (windows.size() < 2) {
    throw DataError("need at least 2 training windows to split off a validation set, got " +
                    std::to_string(windows.size()));
  }
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("validation fraction must be in (0, 1)");
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  const auto n = windows.size();
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  Split out;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_val ? out.validation : out.train).push_back(windows[order[i]]);
  }
  return out;
}

double evaluate(const std::vector<TrainingWindow>& windows, const ModelParams& params) {
  if (windows.empty()) throw DataError("evaluate: no windows");
  double total = 0.0;
  for (const auto& w : windows) {
    const ForwardResult f = model_forward(w.input, params);
    total += loss(f.pitch_logits, f.duration_logits, w.target);
  }
  return total / static_cast<double>(windows.size());
}

TrainResult train(const Split& split, const Vocabulary& vocab, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty() || split.validation.empty()) throw DataError("train: empty training or validation set");

  const ModelConfig model = config.model_config(vocab);
  Rng rng(config.seed);
  TrainResult result{ModelParams::initialize(model, rng), {}};
  ModelParams& params = result.params;
  TrainHistory& history = result.history;

  history.initial_train_loss = evaluate(split.train, params);
  history.initial_val_loss = evaluate(split.validation, params);

  ModelParams best = params;
  double best_val = history.initial_val_loss;
  std::size_t waited = 0;

  OptimizerState optimizer(config, model);
  ModelParams grads = ModelParams::zeros(model);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double scale = 1.0 / static_cast<double>(config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      zero(grads);
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t k = start; k < end; ++k) {
        const TrainingWindow& w = split.train[order[k]];
        const ForwardResult f = model_forward(w.input, params);
        const double l = loss(f.pitch_logits, f.duration_logits, w.target);
        if (!std::isfinite(l)) {
          throw ModelError("non-finite loss in epoch " + std::to_string(epoch) + " on the window of melody " +
                           std::to_string(w.melody) + " targeting event " + std::to_string(w.position));
        }
        epoch_loss += l;
        backward(f.trace, w.target, params, grads, scale);
      }
      optimizer.step(params, grads);
    }

    const double train_loss = epoch_loss / static_cast<double>(order.size());
    const double val_loss = evaluate(split.validation, params);
    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);

    if (!std::isfinite(val_loss)) {
      throw ModelError("non-finite validation loss in epoch " + std::to_string(epoch));
    }
    const bool significant = val_loss < best_val - config.min_delta;
    if (val_loss < best_val) {
      best_val = val_loss;
      history.best_epoch = epoch;
      best = params;
    }
    history.stopped_epoch = epoch;
    waited = significant ? 0 : waited + 1;
    if (waited >= config.patience) {
      history.stopped_early = true;
      break;
    }
  }

  params = std::move(best);
  return result;
}

}  // namespace climatune
