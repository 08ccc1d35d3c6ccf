#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "valence/backends.hpp"

using namespace valence;
using L = ValenceLabel;

namespace {

Chunk chunk(const std::string& text, const std::string& surface) {
  Chunk c;
  c.chunk_id = "c1";
  c.term_id = "t1";
  c.surface = surface;
  c.window_text = text;
  return c;
}

ClassifyOptions options(ClassifyMode mode = ClassifyMode::kScoreMask) {
  ClassifyOptions o;
  o.tmpl.kind = TemplateKind::kClozePrimed;
  o.verbalizer = builtin_presets().verbalizer("single_word");
  o.mode = mode;
  return o;
}

}  // namespace

TEST_CASE("chunk keyword is the lowercased surface") {
  CHECK(chunk_keyword(chunk("x", "Poor Compliance")) == "poor compliance");
  CHECK(chunk_keyword(chunk("x", "")) == "t1");
  CHECK(render_chunk(chunk("Pt Calm", "Calm"), options().tmpl) == "Pt Calm Keyword is: calm. This sentence is: [MASK]");
}

TEST_CASE("mock backend rules") {
  MockBackend mock({{"angry", WordLogits{{"negative", 5}, {"positive", 0}, {"neutral", 0}}, "stigmatizing", false},
                    {"boom", std::nullopt, std::nullopt, true}},
                   "neutral");
  CHECK(classify_prompt(mock, "pt angry", options()) == L::kStigmatizing);
  CHECK(classify_prompt(mock, "pt calm", options()) == L::kStigmatizing);  // uniform tie
  CHECK(classify_prompt(mock, "pt angry", options(ClassifyMode::kGenerate)) == L::kStigmatizing);
  CHECK(classify_prompt(mock, "pt calm", options(ClassifyMode::kGenerate)) == L::kNeutral);
  CHECK_THROWS_AS(classify_prompt(mock, "boom", options()), BackendError);
  CHECK(mock.calls() >= 4);
  CHECK_THROWS_AS(mock.train({}, TrainConfig{}), BackendError);
}

TEST_CASE("mock backend from json") {
  const Json j = {{"rules", {{{"pattern", "happy"}, {"logits", {{"negative", 0}, {"positive", 2}, {"neutral", 0}}}}}}};
  auto mock = MockBackend::from_json(j);
  CHECK(classify_prompt(*mock, "happy", options()) == L::kPrivileging);
}

TEST_CASE("baseline backend trains and scores") {
  BaselineBackend b(builtin_presets().verbalizer("single_word"));
  CHECK_THROWS_AS(b.model(), BackendError);
  std::vector<LabeledPrompt> data;
  for (int i = 0; i < 30; ++i) {
    data.push_back({i % 3 == 0 ? "hostile rude" : i % 3 == 1 ? "lovely kind" : "routine visit", static_cast<L>(i % 3)});
  }
  TrainConfig cfg;
  cfg.features.dim = 512;
  cfg.max_epochs = 30;
  b.train(data, cfg);
  CHECK(classify_prompt(b, "hostile rude", options()) == L::kStigmatizing);
  CHECK(classify_prompt(b, "lovely kind", options(ClassifyMode::kGenerate)) == L::kPrivileging);
  CHECK_FALSE(b.last_report().train_loss.empty());
}

TEST_CASE("classify mode names") {
  CHECK(parse_classify_mode("score_mask") == ClassifyMode::kScoreMask);
  CHECK(parse_classify_mode(to_string(ClassifyMode::kGenerate)) == ClassifyMode::kGenerate);
  CHECK_THROWS_AS(parse_classify_mode("logprobs"), ValidationError);
}

TEST_CASE("make_backend specs") {
  const Verbalizer& v = builtin_presets().verbalizer("single_word");
  CHECK(make_backend("mock", v, std::nullopt)->name() == "mock");
  CHECK_THROWS_AS(make_backend("baseline", v, std::nullopt), Error);
  CHECK_THROWS_AS(make_backend("gpt", v, std::nullopt), ValidationError);
}

TEST_CASE("remote backend speaks the wire contract") {
  httplib::Server server;
  server.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    Json logits = Json::object();
    for (const auto& w : body.at("candidate_words")) logits[w.get<std::string>()] = w == "positive" ? 4.0 : 0.0;
    res.set_content(Json{{"logits", logits}}.dump(), "application/json");
  });
  server.Post("/generate", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"text": " Neutral."})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.timeout_seconds = 5;
  RemoteBackend remote(cfg);
  CHECK(classify_prompt(remote, "x", options()) == L::kPrivileging);
  CHECK(classify_prompt(remote, "x", options(ClassifyMode::kGenerate)) == L::kNeutral);
  server.stop();
  t.join();

  RemoteConfig dead;
  dead.endpoint = "http://127.0.0.1:1";
  dead.timeout_seconds = 1;
  RemoteBackend unreachable(dead);
  try {
    classify_prompt(unreachable, "x", options());
    FAIL("expected a backend error");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::kConnectivity);
    CHECK(e.exit_code() == ExitCode::kBackend);
  }
}

TEST_CASE("remote backend rejects malformed replies") {
  httplib::Server server;
  server.Post("/score", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"logits": {"negative": 1}})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  RemoteConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  RemoteBackend remote(cfg);
  CHECK_THROWS_AS(classify_prompt(remote, "x", options()), BackendError);
  server.stop();
  t.join();
}
