#include "climatune/service.hpp"

#include <httplib.h>

#include <random>
#include <set>

#include "climatune/error.hpp"
#include "climatune/export.hpp"
#include "climatune/hash.hpp"

namespace climatune {

namespace {

using nlohmann::json;

Response json_response(int status, const json& body) { return Response{status, body.dump(), "application/json"}; }

Response error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}, {"status", status}});
}

struct UnknownYear : DataError {
  using DataError::DataError;
};

int status_for(const Error& e) {
  if (dynamic_cast<const UnknownYear*>(&e)) return 404;
  switch (e.kind()) {
    case ErrorKind::usage: return 400;
    case ErrorKind::data: return 400;
    case ErrorKind::model: return 500;
    case ErrorKind::io: return 500;
  }
  return 500;
}

std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

bool model_ready(const ServiceState& s) { return s.checkpoint && s.vocab && s.temperatures; }

std::string unavailable(const ServiceState& s) {
  if (!s.temperatures) return "climate data not loaded: " + s.data_problem;
  return "model not loaded: " + s.model_problem;
}

GenerationResult run_query(const ServiceState& s, const GenerationQuery& q) {
  const bool overridden = q.pitch_temperature && q.duration_temperature;
  if (!overridden && !s.temperatures->contains(q.year)) {
    throw UnknownYear("unknown year " + std::to_string(q.year) + "; valid years are " +
                    std::to_string(s.temperatures->first_year()) + "-" + std::to_string(s.temperatures->last_year()));
  }
  return generate(q, s.checkpoint->params, *s.vocab, *s.temperatures);
}

json api_query_echo(const GenerationQuery& q) {
  json j = to_json(q);
  j.erase("sql");
  return j;
}

}  // namespace

ServiceState load_service_state(const std::filesystem::path& data_dir, const std::filesystem::path& checkpoint) {
  ServiceState s;
  try {
    const std::string text = read_file(data_dir / "temperatures.json");
    s.temperatures = TemperatureVectors::from_json(text);
    s.snapshot_hash = hex64(fnv1a64(text));
  } catch (const std::exception& e) {
    s.data_problem = std::string(e.what()) + " (run `climatune preprocess`)";
  }
  try {
    const std::string bytes = read_file(checkpoint);
    Checkpoint ck = parse_checkpoint(bytes);
    Vocabulary vocab = Vocabulary::from_json(ck.vocab_json);
    if (vocab.hash() != ck.vocab_hash) throw ModelError("checkpoint vocabulary does not match its recorded hash");
    s.checkpoint_hash = hex64(fnv1a64(bytes));
    s.vocab = std::move(vocab);
    s.checkpoint = std::move(ck);
  } catch (const std::exception& e) {
    s.model_problem = std::string(e.what()) + " (run `climatune train`)";
  }
  return s;
}

Response handle_years(const ServiceState& s) {
  if (!s.temperatures) return error_response(503, unavailable(s));
  // Reuse the 6-decimal serialisation of the snapshot.
  const json snapshot = json::parse(s.temperatures->to_json());
  json years = json::array();
  for (const auto& [year, t] : s.temperatures->years) {
    const json& entry = snapshot.at("years").at(std::to_string(year));
    years.push_back(
        {{"year", year}, {"pitch_temperature", entry.at("pitch")}, {"duration_temperature", entry.at("duration")}});
  }
  return json_response(200, years);
}

Response handle_model(const ServiceState& s) {
  if (!s.checkpoint) return error_response(503, "model not loaded: " + s.model_problem);
  const Checkpoint& ck = *s.checkpoint;
  const ModelConfig& c = ck.params.config;
  const TrainHistory& h = ck.history;
  return json_response(200, {{"hidden", c.hidden},
                             {"sql", c.sql},
                             {"pitch_embed", c.pitch_embed},
                             {"duration_embed", c.duration_embed},
                             {"pitch_vocab_size", c.pitch_vocab},
                             {"duration_vocab_size", c.duration_vocab},
                             {"parameter_count", ck.params.parameter_count()},
                             {"history",
                              {{"best_epoch", h.best_epoch},
                               {"stopped_epoch", h.stopped_epoch},
                               {"stopped_early", h.stopped_early},
                               {"best_val_loss", h.best_val_loss()},
                               {"initial_val_loss", h.initial_val_loss}}},
                             {"hashes",
                              {{"checkpoint", s.checkpoint_hash},
                               {"vocab", hex64(ck.vocab_hash)},
                               {"snapshot", s.snapshot_hash}}}});
}

GenerationQuery parse_api_query(std::string_view body, std::size_t checkpoint_sql, std::uint64_t fallback_rng_seed) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw UsageError(std::string("request body is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("request body must be a JSON object");
  static const std::set<std::string> allowed = {"year", "seed", "mxx", "mxl", "rng_seed", "pitch_temperature",
                                                "duration_temperature"};
  for (const auto& [key, value] : j.items()) {
    if (key == "sql") throw UsageError("'sql' is fixed by the loaded checkpoint and cannot be set by the client");
    if (!allowed.count(key)) throw UsageError("unknown field '" + key + "'");
  }

  GenerationQuery q;
  q.sql = checkpoint_sql;
  q.rng_seed = fallback_rng_seed;
  if (!j.contains("year") || !j["year"].is_number_integer()) throw UsageError("'year' must be an integer");
  q.year = j["year"].get<int>();

  if (j.contains("seed")) {
    const json& seed = j["seed"];
    if (!seed.is_object() || !seed.contains("pitch") || !seed.contains("duration") || !seed["pitch"].is_array() ||
        !seed["duration"].is_array() || seed.size() != 2) {
      throw UsageError("'seed' must be {\"pitch\": [...], \"duration\": [...]}");
    }
    if (seed["pitch"].size() != seed["duration"].size()) {
      throw UsageError("'seed.pitch' and 'seed.duration' must have the same length");
    }
    q.seed.clear();
    for (std::size_t i = 0; i < seed["pitch"].size(); ++i) {
      const json& p = seed["pitch"][i];
      const json& d = seed["duration"][i];
      if (!p.is_string()) throw UsageError("seed pitches must be strings such as \"A4\"");
      try {
        DurationToken dur = d.is_string() ? DurationToken::parse(d.get<std::string>())
                            : d.is_number() ? DurationToken::parse(json(d).dump())
                                            : throw UsageError("seed durations must be numbers or \"n/d\" strings");
        q.seed.push_back(NoteEvent{PitchToken::parse(p.get<std::string>()), dur});
      } catch (const DataError& e) {
        throw UsageError(std::string("seed event ") + std::to_string(i) + ": " + e.what());
      }
    }
  }
  auto positive = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer() || j[key].get<std::int64_t>() < 1) {
      throw UsageError(std::string("'") + key + "' must be a positive integer");
    }
    dst = j[key].get<std::size_t>();
  };
  positive("mxx", q.mxx);
  positive("mxl", q.mxl);
  if (j.contains("rng_seed")) {
    if (!j["rng_seed"].is_number_unsigned()) throw UsageError("'rng_seed' must be a non-negative integer");
    q.rng_seed = j["rng_seed"].get<std::uint64_t>();
  }
  for (const char* key : {"pitch_temperature", "duration_temperature"}) {
    if (!j.contains(key) || j[key].is_null()) continue;
    if (!j[key].is_number()) throw UsageError(std::string("'") + key + "' must be a number in [0, 1]");
    const double t = j[key].get<double>();
    if (!(t >= 0.0 && t <= 1.0)) throw UsageError(std::string("'") + key + "' must be in [0, 1]");
    (std::string_view(key) == "pitch_temperature" ? q.pitch_temperature : q.duration_temperature) = t;
  }
  if (q.mxl < q.seed.size()) throw UsageError("'mxl' is shorter than the seed");
  return q;
}

Response handle_generate(const ServiceState& s, std::string_view body, std::uint64_t fallback_rng_seed) {
  if (!model_ready(s)) return error_response(503, unavailable(s));
  try {
    const GenerationQuery q = parse_api_query(body, s.checkpoint->params.config.sql, fallback_rng_seed);
    const GenerationResult r = run_query(s, q);
    json out = result_to_json(r, *s.vocab);
    out["rng_seed"] = q.rng_seed;
    out["midi_url"] = "/api/midi?query=" + url_encode(api_query_echo(q).dump());
    out["checkpoint_hash"] = s.checkpoint_hash;
    out["snapshot_hash"] = s.snapshot_hash;
    return json_response(200, out);
  } catch (const Error& e) {
    return error_response(status_for(e), e.what());
  }
}

Response handle_midi(const ServiceState& s, const std::string& query_json) {
  if (!model_ready(s)) return error_response(503, unavailable(s));
  try {
    if (query_json.empty()) throw UsageError("missing 'query' parameter");
    const GenerationQuery q = parse_api_query(query_json, s.checkpoint->params.config.sql, 0);
    const GenerationResult r = run_query(s, q);
    return Response{200, to_midi(r.melody), "audio/midi"};
  } catch (const Error& e) {
    return error_response(status_for(e), e.what());
  }
}

struct HttpService::Impl {
  std::shared_ptr<const ServiceState> state;
  ServeOptions options;
  httplib::Server server;
  std::mutex seed_mutex;
  std::random_device device;

  std::uint64_t fresh_seed() {
    std::lock_guard lock(seed_mutex);
    return (static_cast<std::uint64_t>(device()) << 32 | device()) & ((1ULL << 53) - 1);  // JSON-safe
  }
};

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpService::HttpService(std::shared_ptr<const ServiceState> state, ServeOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->state = std::move(state);
  impl_->options = std::move(options);
  auto& srv = impl_->server;
  Impl* self = impl_.get();

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.Get("/api/years", [self](const httplib::Request&, httplib::Response& res) {
    reply(res, handle_years(*self->state));
  });
  srv.Get("/api/model", [self](const httplib::Request&, httplib::Response& res) {
    reply(res, handle_model(*self->state));
  });
  srv.Post("/api/generate", [self](const httplib::Request& req, httplib::Response& res) {
    reply(res, handle_generate(*self->state, req.body, self->fresh_seed()));
  });
  srv.Get("/api/midi", [self](const httplib::Request& req, httplib::Response& res) {
    const Response r = handle_midi(*self->state, req.get_param_value("query"));
    reply(res, r);
    if (r.status == 200) res.set_header("Content-Disposition", "attachment; filename=\"climatune.mid\"");
  });
  if (impl_->options.static_dir) {
    if (!srv.set_mount_point("/", impl_->options.static_dir->string())) {
      throw IoError("static directory " + impl_->options.static_dir->string() + " does not exist");
    }
  }
}

HttpService::~HttpService() { stop(); }

int HttpService::bind() {
  auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
  } else if (!impl_->server.bind_to_port(o.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot listen on " + o.host + ":" + std::to_string(o.port));
  return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace climatune
