#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "climatune/climate.hpp"
#include "climatune/generation.hpp"
#include "climatune/training.hpp"

namespace climatune {

/// Everything the endpoints read. Built once at startup and never mutated.
struct ServiceState {
  std::optional<TemperatureVectors> temperatures;
  std::string snapshot_hash;

  std::optional<Checkpoint> checkpoint;
  std::optional<Vocabulary> vocab;
  std::string checkpoint_hash;

  /// Reasons a part failed to load, reported by 503 responses.
  std::string data_problem;
  std::string model_problem;
};

/// Loads whatever is available; missing pieces are recorded, not thrown.
ServiceState load_service_state(const std::filesystem::path& data_dir, const std::filesystem::path& checkpoint);

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// GET /api/years
Response handle_years(const ServiceState& state);
/// GET /api/model
Response handle_model(const ServiceState& state);
/// POST /api/generate. `fallback_rng_seed` is used (and echoed) when the
/// body carries no rng_seed.
Response handle_generate(const ServiceState& state, std::string_view body, std::uint64_t fallback_rng_seed);
/// GET /api/midi?query=<ApiQuery JSON with rng_seed>
Response handle_midi(const ServiceState& state, const std::string& query_json);

/// Validate an ApiQuery document against the loaded checkpoint. Throws
/// UsageError on schema violations.
GenerationQuery parse_api_query(std::string_view body, std::size_t checkpoint_sql, std::uint64_t fallback_rng_seed);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;
};

/// The HTTP server around the handlers. CORS is open for local development.
class HttpService {
 public:
  HttpService(std::shared_ptr<const ServiceState> state, ServeOptions options);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds the socket; returns the bound port. Throws IoError.
  int bind();
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace climatune
