#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "climatune/corpus.hpp"
#include "climatune/model.hpp"

namespace climatune {

enum class Optimizer { adam, momentum };

struct TrainConfig {
  std::size_t hidden = 256;
  std::size_t pitch_embed = 64;
  std::size_t duration_embed = 16;
  std::size_t sql = 16;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t max_epochs = 500;
  std::size_t patience = 10;
  /// An epoch only resets the patience counter if it beats the best
  /// validation loss by more than this.
  double min_delta = 0.0;
  double validation_fraction = 0.1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 1;

  /// Throws UsageError for out-of-range settings.
  void validate() const;
  ModelConfig model_config(const Vocabulary& vocab) const;
};

struct TrainHistory {
  std::vector<double> train_loss;  // mean loss over the epoch's updates
  std::vector<double> val_loss;
  double initial_train_loss = 0.0;
  double initial_val_loss = 0.0;
  std::size_t best_epoch = 0;  // 1-based; 0 means "initial parameters"
  std::size_t stopped_epoch = 0;
  bool stopped_early = false;

  double best_val_loss() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainHistory& history);
TrainHistory train_history_from_json(const nlohmann::json& j);

struct Split {
  std::vector<TrainingWindow> train;
  std::vector<TrainingWindow> validation;
};

/// Seeded shuffle, then max(1, round(fraction * n)) windows go to validation.
Split split_train_val(const std::vector<TrainingWindow>& windows, double fraction, std::uint64_t seed);

/// Mean loss over a set of windows.
double evaluate(const std::vector<TrainingWindow>& windows, const ModelParams& params);

struct TrainResult {
  ModelParams params;  // parameters of the best validation epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Batch-size-1 (by default) gradient training with early stopping.
TrainResult train(const Split& split, const Vocabulary& vocab, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::uint64_t vocab_hash = 0;
  std::string vocab_json;
  TrainConfig config;
  TrainHistory history;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Serialized bytes exactly as save_checkpoint writes them.
std::string serialize_checkpoint(const Checkpoint& checkpoint);

/// Throws ModelError on a bad magic/version, checksum failure (truncation or
/// corruption) or, when `expected_vocab_hash` is given, a vocabulary mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);
Checkpoint parse_checkpoint(std::string_view bytes, std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

}  // namespace climatune
