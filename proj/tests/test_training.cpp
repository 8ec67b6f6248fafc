#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "climatune/error.hpp"
#include "climatune/hash.hpp"
#include "climatune/training.hpp"
#include "support.hpp"

using namespace climatune;

namespace {

std::vector<TrainingWindow> dummy_windows(std::size_t n) {
  std::vector<TrainingWindow> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i].input = {TokenPair{1, 1}};
    w[i].target = TokenPair{1, 1};
    w[i].position = i;
  }
  return w;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.hidden = 12;
  c.pitch_embed = 4;
  c.duration_embed = 2;
  c.sql = 2;
  c.learning_rate = 1e-2;
  c.max_epochs = 200;
  c.patience = 5;
  c.min_delta = 1e-4;
  c.validation_fraction = 0.25;
  c.seed = 9;
  return c;
}

struct Fixture {
  std::vector<Melody> corpus;
  Vocabulary vocab;
  Split split;
};

// One 2-token melody repeated four times.
Fixture repeated_two_token(std::size_t sql) {
  Fixture f;
  for (int i = 0; i < 4; ++i) {
    f.corpus.push_back(testing::melody({testing::ev("A4", "1"), testing::ev("B4", "1/2")}));
  }
  f.vocab = build_vocab(f.corpus);
  f.split = split_train_val(windowize(f.corpus, f.vocab, sql), 0.25, 3);
  return f;
}

}  // namespace

TEST_CASE("split_train_val sizes, rounding and determinism") {
  auto s = split_train_val(dummy_windows(100), 0.1, 1);
  CHECK(s.train.size() == 90);
  CHECK(s.validation.size() == 10);
  auto seven = split_train_val(dummy_windows(7), 0.1, 1);
  CHECK(seven.validation.size() == 1);
  CHECK(seven.train.size() == 6);
  auto two = split_train_val(dummy_windows(2), 0.5, 1);
  CHECK(two.validation.size() == 1);
  CHECK(two.train.size() == 1);

  auto again = split_train_val(dummy_windows(100), 0.1, 1);
  for (std::size_t i = 0; i < 10; ++i) CHECK(again.validation[i].position == s.validation[i].position);
  auto other = split_train_val(dummy_windows(100), 0.1, 2);
  bool differs = false;
  for (std::size_t i = 0; i < 10; ++i) differs |= other.validation[i].position != s.validation[i].position;
  CHECK(differs);

  CHECK_THROWS_AS(split_train_val(dummy_windows(1), 0.1, 1), DataError);
}

TEST_CASE("TrainConfig validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.validation_fraction = 0.6;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.validation_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.validation_fraction = 0.5;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config and history JSON round trips") {
  TrainConfig c = tiny_config();
  c.optimizer = Optimizer::momentum;
  const TrainConfig back = train_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  TrainHistory h;
  h.train_loss = {3.0, 2.0};
  h.val_loss = {3.1, 2.5};
  h.best_epoch = 2;
  h.stopped_epoch = 2;
  CHECK(to_json(train_history_from_json(to_json(h))) == to_json(h));
  CHECK(h.best_val_loss() == 2.5);
}

TEST_CASE("optimisation sanity on a 5-window corpus") {
  const Melody m = testing::melody({testing::ev("C4", "1"), testing::ev("D4", "1/2"), testing::ev("E4", "1"),
                                    testing::ev("C4", "1"), testing::ev("G4", "2"), testing::ev("E4", "1"),
                                    testing::ev("D4", "1/2")});
  const Vocabulary v = build_vocab({m});
  const auto windows = windowize({m}, v, 2);
  REQUIRE(windows.size() == 5);
  TrainConfig c = tiny_config();
  c.max_epochs = 20;
  c.validation_fraction = 0.2;
  const Split s = split_train_val(windows, c.validation_fraction, 1);
  for (Optimizer o : {Optimizer::adam, Optimizer::momentum}) {
    c.optimizer = o;
    const TrainResult r = train(s, v, c);
    CHECK(r.history.train_loss.back() < r.history.initial_train_loss);
  }
}

TEST_CASE("a repeated 2-token melody is memorised and early stopping fires") {
  const Fixture f = repeated_two_token(2);
  std::size_t callbacks = 0;
  const TrainResult r = train(f.split, f.vocab, tiny_config(), [&](std::size_t, double, double) { ++callbacks; });
  const TrainHistory& h = r.history;
  CHECK(callbacks == h.stopped_epoch);
  CHECK(h.val_loss.size() == h.stopped_epoch);
  CHECK(h.stopped_early);
  CHECK(h.best_val_loss() < 0.05);
  CHECK(h.stopped_epoch - h.best_epoch <= 5);

  // the returned parameters are the ones with the minimum validation loss
  const double min_val = *std::min_element(h.val_loss.begin(), h.val_loss.end());
  CHECK(h.best_val_loss() == min_val);
  CHECK(evaluate(f.split.validation, r.params) == min_val);
}

TEST_CASE("history invariant holds with default patience") {
  const Fixture f = repeated_two_token(2);
  TrainConfig c = tiny_config();
  c.patience = 10;
  const TrainResult r = train(f.split, f.vocab, c);
  CHECK(r.history.stopped_epoch - r.history.best_epoch <= 10);
}

TEST_CASE("same config and seed give bit-identical checkpoints") {
  const Fixture f = repeated_two_token(2);
  TrainConfig c = tiny_config();
  c.max_epochs = 15;
  auto run = [&] {
    TrainResult r = train(f.split, f.vocab, c);
    return serialize_checkpoint(Checkpoint{r.params, f.vocab.hash(), f.vocab.to_json(), c, r.history});
  };
  CHECK(run() == run());
  c.seed = 10;
  const std::string other = run();
  c.seed = 9;
  CHECK(other != run());
}

TEST_CASE("non-finite loss aborts with a diagnostic naming the window") {
  const Fixture f = repeated_two_token(2);
  TrainConfig c = tiny_config();
  c.optimizer = Optimizer::momentum;
  c.learning_rate = 1e300;
  try {
    train(f.split, f.vocab, c);
    FAIL("expected divergence");
  } catch (const ModelError& e) {
    const std::string what = e.what();
    CHECK(what.find("non-finite") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip and failure modes") {
  const Vocabulary v = testing::small_vocab(5, 3);
  Checkpoint ck{testing::random_model(v, 6, 3, 4), v.hash(), v.to_json(), tiny_config(), {}};
  ck.history.train_loss = {1.5};
  ck.history.val_loss = {1.25};
  ck.history.best_epoch = ck.history.stopped_epoch = 1;

  const auto dir = testing::temp_dir("checkpoint");
  save_checkpoint(ck, dir / "m.ckpt");
  const Checkpoint back = load_checkpoint(dir / "m.ckpt", v.hash());
  CHECK(back.params == ck.params);
  CHECK(back.vocab_hash == ck.vocab_hash);
  CHECK(back.vocab_json == ck.vocab_json);
  CHECK(to_json(back.config) == to_json(ck.config));
  CHECK(to_json(back.history) == to_json(ck.history));
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ck));

  const std::string bytes = serialize_checkpoint(ck);
  auto message = [](std::string_view b, std::optional<std::uint64_t> h = std::nullopt) {
    try {
      parse_checkpoint(b, h);
    } catch (const ModelError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  std::string corrupt = bytes;
  corrupt.back() = static_cast<char>(corrupt.back() ^ 0x5a);
  CHECK(message(corrupt).find("truncated or corrupt") != std::string::npos);
  CHECK(message(bytes.substr(0, bytes.size() / 2)).find("truncated or corrupt") != std::string::npos);
  CHECK(message("NOTACKPT").find("magic") != std::string::npos);

  const Vocabulary other = testing::small_vocab(4, 3);
  const std::string mismatch = message(bytes, other.hash());
  CHECK(mismatch.find(hex64(v.hash())) != std::string::npos);
  CHECK(mismatch.find(hex64(other.hash())) != std::string::npos);

  std::string future = bytes;
  future[8] = 2;  // version field follows the 8-byte magic
  const auto body = std::string_view(future).substr(0, future.size() - 8);
  const std::uint64_t sum = fnv1a64(body);
  std::memcpy(future.data() + body.size(), &sum, 8);
  CHECK(message(future).find("version") != std::string::npos);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
}
