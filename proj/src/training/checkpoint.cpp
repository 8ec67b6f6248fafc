#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "climatune/error.hpp"
#include "climatune/hash.hpp"
#include "climatune/training.hpp"

namespace climatune {

namespace {

constexpr std::string_view kMagic = "CLMTCKPT";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ModelError("checkpoint is truncated or corrupt");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json model_config_json(const ModelConfig& c) {
  return {{"pitch_vocab", c.pitch_vocab}, {"duration_vocab", c.duration_vocab}, {"pitch_embed", c.pitch_embed},
          {"duration_embed", c.duration_embed}, {"hidden", c.hidden}, {"sql", c.sql}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.pitch_vocab = j.at("pitch_vocab").get<std::size_t>();
  c.duration_vocab = j.at("duration_vocab").get<std::size_t>();
  c.pitch_embed = j.at("pitch_embed").get<std::size_t>();
  c.duration_embed = j.at("duration_embed").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.sql = j.at("sql").get<std::size_t>();
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out;
  out.append(kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, ck.vocab_hash);

  const nlohmann::json meta = {{"model", model_config_json(ck.params.config)},
                               {"train", to_json(ck.config)},
                               {"history", to_json(ck.history)},
                               {"vocab", ck.vocab_json}};
  const std::string meta_text = meta.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  out.append(meta_text);

  const auto tensors = ck.params.tensors();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put<std::uint64_t>(out, m->rows());
    put<std::uint64_t>(out, m->cols());
    for (double v : m->values()) put<double>(out, v);
  }
  put<std::uint64_t>(out, fnv1a64(out));
  return out;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ck);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint parse_checkpoint(std::string_view bytes, std::optional<std::uint64_t> expected_vocab_hash) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw ModelError("not a checkpoint file (bad magic)");
  }
  if (bytes.size() < kMagic.size() + 4 + 8 + 8) throw ModelError("checkpoint is truncated or corrupt");
  const auto body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), 8);
  if (stored != fnv1a64(body)) throw ModelError("checkpoint is truncated or corrupt (checksum mismatch)");

  Reader r(body);
  r.take(kMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw ModelError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  ck.vocab_hash = r.get<std::uint64_t>();
  if (expected_vocab_hash && *expected_vocab_hash != ck.vocab_hash) {
    throw ModelError("checkpoint vocabulary " + hex64(ck.vocab_hash) + " does not match vocabulary " +
                     hex64(*expected_vocab_hash));
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.take(r.get<std::uint32_t>()));
    ck.params = ModelParams::zeros(model_config_from_json(meta.at("model")));
    ck.config = train_config_from_json(meta.at("train"));
    ck.history = train_history_from_json(meta.at("history"));
    ck.vocab_json = meta.at("vocab").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("checkpoint metadata is invalid: ") + e.what());
  }

  auto tensors = ck.params.tensors();
  const auto count = r.get<std::uint32_t>();
  if (count != tensors.size()) {
    throw ModelError("checkpoint has " + std::to_string(count) + " tensors, expected " +
                     std::to_string(tensors.size()));
  }
  for (auto& [name, m] : tensors) {
    const auto got = r.take(r.get<std::uint32_t>());
    if (got != name) throw ModelError("checkpoint tensor '" + std::string(got) + "' where '" + std::string(name) + "' was expected");
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows != m->rows() || cols != m->cols()) {
      throw ModelError("checkpoint tensor " + std::string(name) + " has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", expected " + std::to_string(m->rows()) + "x" +
                       std::to_string(m->cols()));
    }
    for (double& v : m->values()) v = r.get<double>();
  }
  if (r.remaining() != 0) throw ModelError("checkpoint has trailing bytes");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_vocab_hash) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str(), expected_vocab_hash);
}

}  // namespace climatune
