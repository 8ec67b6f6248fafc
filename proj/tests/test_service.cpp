#include <doctest.h>

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "climatune/export.hpp"
#include "climatune/hash.hpp"
#include "climatune/service.hpp"
#include "support.hpp"

using namespace climatune;
using nlohmann::json;

namespace {

ServiceState ready_state() {
  ServiceState s;
  s.temperatures = testing::linear_vectors();
  s.snapshot_hash = "snap";
  const Vocabulary v = testing::small_vocab(10, 4);
  Checkpoint ck{testing::random_model(v, 8, 16, 5), v.hash(), v.to_json(), {}, {}};
  ck.history.train_loss = {2.0, 1.0};
  ck.history.val_loss = {2.5, 1.5};
  ck.history.best_epoch = ck.history.stopped_epoch = 2;
  s.checkpoint_hash = hex64(fnv1a64(serialize_checkpoint(ck)));
  s.checkpoint = std::move(ck);
  s.vocab = v;
  return s;
}

json body_of(const Response& r) { return json::parse(r.body); }

}  // namespace

TEST_CASE("years and model endpoints") {
  const ServiceState s = ready_state();
  const Response years = handle_years(s);
  CHECK(years.status == 200);
  const json y = body_of(years);
  REQUIRE(y.size() == 146);
  CHECK(y[0]["year"] == 1876);
  CHECK(y[0]["pitch_temperature"] == 0.0);
  CHECK(y[145]["duration_temperature"] == 1.0);

  const json m = body_of(handle_model(s));
  CHECK(m["hidden"] == 8);
  CHECK(m["sql"] == 16);
  CHECK(m["pitch_vocab_size"] == 11);
  CHECK(m["parameter_count"] == s.checkpoint->params.parameter_count());
  CHECK(m["history"]["best_epoch"] == 2);
  CHECK(m["hashes"]["checkpoint"] == s.checkpoint_hash);
}

TEST_CASE("generate: schema, determinism and matrix shapes") {
  const ServiceState s = ready_state();
  const Response r = handle_generate(s, R"({"year": 2004, "rng_seed": 11})", 99);
  REQUIRE(r.status == 200);
  const json j = body_of(r);
  CHECK(j["rng_seed"] == 11);
  CHECK(j["melody"]["pitch"].size() == 16);
  CHECK(j["melody"]["pitch"][0] == "A4");
  CHECK(j["attention"].size() == 15);
  CHECK(j["attention"][0].size() == 16);
  CHECK(j["checkpoint_hash"] == s.checkpoint_hash);
  CHECK(j["midi_url"].get<std::string>().rfind("/api/midi?query=", 0) == 0);
  CHECK(handle_generate(s, R"({"year": 2004, "rng_seed": 11})", 5).body == r.body);

  const json empty = body_of(handle_generate(s, R"({"year": 1990, "seed": {"pitch": [], "duration": []}})", 3));
  CHECK(empty["melody"]["pitch"].size() == 16);
  CHECK(empty["rng_seed"] == 3);  // fallback seed is echoed

  const json seeded =
      body_of(handle_generate(s, R"({"year": 1990, "seed": {"pitch": ["C4", "D4"], "duration": [0.5, "1/4"]}, "mxx": 3})", 3));
  CHECK(seeded["melody"]["duration"][1] == "1/4");
  CHECK(seeded["melody"]["pitch"].size() == 5);
  CHECK(seeded["pitch_candidates"]["rows"].size() == 3);
  CHECK(seeded["pitch_candidates"]["tokens"].size() == 11);
}

TEST_CASE("generate: error statuses") {
  const ServiceState s = ready_state();
  auto status = [&](const char* body) { return handle_generate(s, body, 0).status; };
  CHECK(status("not json") == 400);
  CHECK(status("[1]") == 400);
  CHECK(status(R"({})") == 400);
  CHECK(status(R"({"year": "1984"})") == 400);
  CHECK(status(R"({"year": 1984, "sql": 16})") == 400);
  CHECK(body_of(handle_generate(s, R"({"year": 1984, "sql": 8})", 0))["error"].get<std::string>().find("sql") !=
        std::string::npos);
  CHECK(status(R"({"year": 1984, "colour": 1})") == 400);
  CHECK(status(R"({"year": 1984, "mxx": 0})") == 400);
  CHECK(status(R"({"year": 1984, "pitch_temperature": 2})") == 400);
  CHECK(status(R"({"year": 1984, "seed": {"pitch": ["A4"], "duration": []}})") == 400);
  CHECK(status(R"({"year": 1984, "seed": {"pitch": ["A9"], "duration": [1]}})") == 400);
  CHECK(status(R"({"year": 1850})") == 404);
  CHECK(status(R"({"year": 1850, "pitch_temperature": 0.5, "duration_temperature": 0.5})") == 200);

  const ServiceState blank;
  CHECK(handle_generate(blank, R"({"year": 1984})", 0).status == 503);
  CHECK(handle_years(blank).status == 503);
  CHECK(handle_model(blank).status == 503);
  CHECK(handle_midi(blank, R"({"year": 1984})").status == 503);
}

TEST_CASE("midi endpoint reproduces the generated melody") {
  const ServiceState s = ready_state();
  const json g = body_of(handle_generate(s, R"({"year": 1950, "rng_seed": 4})", 0));
  const Response midi = handle_midi(s, R"({"year": 1950, "rng_seed": 4})");
  REQUIRE(midi.status == 200);
  CHECK(midi.content_type == "audio/midi");
  const auto d = testing::read_midi(midi.body);
  std::size_t notes = 0;
  for (const auto& p : g["melody"]["pitch"]) notes += p == "rest" ? 0 : 1;
  CHECK(d.notes.size() == notes);
  CHECK(handle_midi(s, "").status == 400);
}

TEST_CASE("load_service_state tolerates missing files") {
  const auto dir = testing::temp_dir("service_state");
  const ServiceState s = load_service_state(dir, dir / "none.ckpt");
  CHECK(!s.temperatures);
  CHECK(!s.checkpoint);
  CHECK(s.data_problem.find("preprocess") != std::string::npos);
  CHECK(s.model_problem.find("train") != std::string::npos);
}

TEST_CASE("HTTP round trip on an ephemeral port") {
  auto state = std::make_shared<const ServiceState>(ready_state());
  const auto static_dir = testing::temp_dir("service_static");
  write_file(static_dir / "index.html", "<html>ok</html>");
  HttpService service(state, ServeOptions{"127.0.0.1", 0, static_dir});
  const int port = service.bind();
  REQUIRE(port > 0);
  std::thread server([&] { service.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  auto years = client.Get("/api/years");
  REQUIRE(years);
  CHECK(years->status == 200);
  CHECK(json::parse(years->body).size() == 146);
  CHECK(years->get_header_value("Access-Control-Allow-Origin") == "*");

  auto gen = client.Post("/api/generate", R"({"year": 2021, "rng_seed": 8})", "application/json");
  REQUIRE(gen);
  CHECK(gen->status == 200);
  const json g = json::parse(gen->body);
  auto midi = client.Get(g["midi_url"].get<std::string>());
  REQUIRE(midi);
  CHECK(midi->status == 200);
  CHECK(midi->body.substr(0, 4) == "MThd");

  auto bad = client.Post("/api/generate", R"({"year": 2021, "sql": 4})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  auto missing = client.Post("/api/generate", R"({"year": 1700})", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto index = client.Get("/index.html");
  REQUIRE(index);
  CHECK(index->body == "<html>ok</html>");

  service.stop();
  server.join();
}
