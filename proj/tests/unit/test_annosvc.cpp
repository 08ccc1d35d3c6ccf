#include <filesystem>
#include <set>
#include <thread>

#include <unistd.h>

#include "doctest.h"
#include "httplib.h"
#include "valence/annosvc.hpp"
#include "valence/annosvc_http.hpp"

using namespace valence;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("valence-anno-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TaskConfig task(std::size_t pool_size = 10, std::size_t overlap = 4) {
  TaskConfig cfg;
  cfg.task_id = "t";
  for (std::size_t i = 0; i < pool_size; ++i) {
    Chunk c;
    c.chunk_id = "c" + std::to_string(10 + i);
    c.term_id = "calm";
    c.window_text = "pt calm";
    cfg.pool.push_back(c);
    if (i < overlap) cfg.overlap.push_back(c.chunk_id);
  }
  cfg.roster = {"ann", "bob"};
  return cfg;
}

}  // namespace

TEST_CASE("queue planning covers the pool") {
  const auto queues = plan_queues(task());
  REQUIRE(queues.size() == 2);
  std::multiset<std::string> all;
  for (const auto& [who, q] : queues) all.insert(q.begin(), q.end());
  CHECK(all.size() == 4 * 2 + 6);
  for (const std::string& id : task().overlap) CHECK(all.count(id) == 2);
  CHECK(plan_queues(task()) == queues);
}

TEST_CASE("task validation") {
  TaskConfig bad = task();
  bad.roster.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = task();
  bad.overlap.push_back("missing");
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("labeling flow, conflicts and replay") {
  TempDir dir;
  const fs::path log = dir.path / "log.jsonl";
  {
    AnnotationService svc(task(), log);
    const NextChunk n1 = svc.next_chunk("ann");
    REQUIRE(n1.chunk.has_value());
    CHECK(svc.next_chunk("ann").chunk->chunk_id == n1.chunk->chunk_id);
    const Receipt r = svc.submit("ann", n1.chunk->chunk_id, "neutral");
    CHECK(r.kind == "label");
    CHECK(r.record_count == 1);
    CHECK_THROWS_AS(svc.submit("ann", n1.chunk->chunk_id, "neutral"), ServiceError);
    const NextChunk n2 = svc.next_chunk("ann");
    CHECK_THROWS_AS(svc.submit("ann", n2.chunk->chunk_id, "meh"), ValidationError);
    CHECK(svc.skip("ann", n2.chunk->chunk_id, "unreadable").kind == "skip");
    CHECK_THROWS_AS(svc.next_chunk("eve"), ServiceError);
  }
  AnnotationService again(task(), log);
  const LiveStats s = again.live_stats();
  CHECK(s.records == 1);
  CHECK(s.progress.at("ann").labeled == 1);
  CHECK(s.progress.at("ann").skipped == 1);
  CHECK(again.records().size() == 1);
}

TEST_CASE("completing a task exports gold and agreement") {
  TempDir dir;
  AnnotationService svc(task(6, 2), dir.path / "log.jsonl");
  for (const std::string who : {"ann", "bob"}) {
    for (NextChunk n = svc.next_chunk(who); !n.done; n = svc.next_chunk(who)) {
      svc.submit(who, n.chunk->chunk_id, "neutral");
    }
  }
  const LiveStats s = svc.live_stats();
  CHECK(s.overlap_complete == 2);
  CHECK(s.records == s.expected_records);
  REQUIRE(s.percent_agreement.has_value());
  CHECK(*s.percent_agreement == 1.0);
  const TaskExport e = svc.export_task();
  CHECK(e.complete);
  CHECK(parse_jsonl(e.labeled_jsonl).records.size() == 6);
  CHECK(parse_jsonl(e.annotations_jsonl).records.size() == 8);
}

TEST_CASE("concurrent submissions are serialized") {
  TempDir dir;
  TaskConfig cfg = task(40, 40);
  cfg.roster = {"a", "b", "c", "d"};
  AnnotationService svc(cfg, dir.path / "log.jsonl");
  std::vector<std::thread> threads;
  for (const std::string& who : cfg.roster) {
    threads.emplace_back([&svc, who] {
      for (NextChunk n = svc.next_chunk(who); !n.done; n = svc.next_chunk(who)) {
        svc.submit(who, n.chunk->chunk_id, "privileging");
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(svc.live_stats().records == 160);
  AnnotationService replay(cfg, dir.path / "log.jsonl");
  CHECK(replay.live_stats().records == 160);
}

TEST_CASE("token authentication") {
  TempDir dir;
  TaskConfig cfg = task();
  cfg.tokens = {{"ann", "s1"}, {"bob", "s2"}};
  AnnotationService svc(cfg, dir.path / "log.jsonl");
  CHECK_NOTHROW(svc.authenticate("ann", "s1"));
  CHECK_THROWS_AS(svc.authenticate("ann", "s2"), ServiceError);
  CHECK_NOTHROW(svc.authenticate_any("s2"));
  CHECK_THROWS_AS(svc.authenticate_any("nope"), ServiceError);
}

TEST_CASE("http front end") {
  TempDir dir;
  TaskConfig cfg = task(4, 1);
  cfg.tokens = {{"ann", "s1"}, {"bob", "s2"}};
  AnnotationServer server;
  server.add_task(std::make_shared<AnnotationService>(cfg, dir.path / "log.jsonl"));
  const int port = server.bind("127.0.0.1", 0);
  std::thread t([&] { server.serve(); });

  httplib::Client client("127.0.0.1", port);
  const httplib::Headers auth = {{"Authorization", "Bearer s1"}};
  auto next = client.Get("/tasks/t/next?annotator=ann", auth);
  REQUIRE(next);
  CHECK(next->status == 200);
  const Json chunk = Json::parse(next->body);
  const std::string id = chunk.at("chunk_id");
  auto post = client.Post("/tasks/t/annotations", auth,
                          Json{{"annotator", "ann"}, {"chunk_id", id}, {"label", "neutral"}}.dump(),
                          "application/json");
  REQUIRE(post);
  CHECK(post->status == 201);
  auto dup = client.Post("/tasks/t/annotations", auth,
                         Json{{"annotator", "ann"}, {"chunk_id", id}, {"label", "neutral"}}.dump(),
                         "application/json");
  REQUIRE(dup);
  CHECK(dup->status == 409);
  auto unauth = client.Get("/tasks/t/next?annotator=ann", httplib::Headers{{"Authorization", "Bearer s2"}});
  REQUIRE(unauth);
  CHECK(unauth->status == 401);
  CHECK(Json::parse(unauth->body).contains("error_code"));
  auto missing = client.Get("/tasks/zzz/stats", auth);
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto stats = client.Get("/tasks/t/stats", auth);
  REQUIRE(stats);
  CHECK(Json::parse(stats->body).at("records") == 1);
  server.stop();
  t.join();
}
