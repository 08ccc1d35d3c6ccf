#include "valence/annosvc_http.hpp"

#include <functional>

#include <httplib.h>

namespace valence {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error_code", code}, {"message", message}});
}

std::string bearer_token(const httplib::Request& req) {
  const std::string header = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (header.rfind(kPrefix, 0) == 0) return header.substr(kPrefix.size());
  return {};
}

}  // namespace

struct AnnotationServer::Impl {
  httplib::Server server;
  std::map<std::string, std::shared_ptr<AnnotationService>> tasks;

  std::shared_ptr<AnnotationService> task(const httplib::Request& req) const {
    const std::string id = req.matches[1];
    const auto it = tasks.find(id);
    if (it == tasks.end()) throw ServiceError(ServiceError::Kind::kNotFound, "unknown task '" + id + "'");
    return it->second;
  }

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static httplib::Server::Handler guarded(Handler inner) {
    return [inner = std::move(inner)](const httplib::Request& req, httplib::Response& res) {
      try {
        inner(req, res);
      } catch (const ServiceError& e) {
        send_error(res, e.status(), e.code(), e.what());
      } catch (const Error& e) {
        send_error(res, 400, "validation", e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "malformed", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void install() {
    server.Get(R"(/tasks/([^/]+)/next)", guarded([this](const auto& req, auto& res) {
      const auto svc = task(req);
      const std::string annotator = req.get_param_value("annotator");
      if (annotator.empty()) throw ValidationError("query parameter 'annotator' is required");
      svc->authenticate(annotator, bearer_token(req));
      const NextChunk next = svc->next_chunk(annotator);
      if (next.done) {
        send_json(res, 200, {{"done", true}, {"completed", next.completed}, {"total", next.total}});
        return;
      }
      const Chunk& c = *next.chunk;
      send_json(res, 200,
                {{"done", false},
                 {"chunk_id", c.chunk_id},
                 {"window_text", c.window_text},
                 {"anchor_start", c.anchor_start},
                 {"anchor_end", c.anchor_end},
                 {"term", c.term_id},
                 {"surface", c.surface},
                 {"position", next.position},
                 {"total", next.total}});
    }));

    server.Post(R"(/tasks/([^/]+)/annotations)", guarded([this](const auto& req, auto& res) {
      const auto svc = task(req);
      const Json body = Json::parse(req.body);
      const auto annotator = require_field<std::string>(body, "annotator");
      const auto chunk_id = require_field<std::string>(body, "chunk_id");
      svc->authenticate(annotator, bearer_token(req));
      const Receipt r = optional_field<bool>(body, "skip", false)
                            ? svc->skip(annotator, chunk_id, optional_field<std::string>(body, "reason", ""))
                            : svc->submit(annotator, chunk_id, require_field<std::string>(body, "label"));
      send_json(res, 201,
                {{"seq", r.seq},
                 {"record_count", r.record_count},
                 {"annotator", r.annotator},
                 {"chunk_id", r.chunk_id},
                 {"kind", r.kind}});
    }));

    server.Get(R"(/tasks/([^/]+)/stats)", guarded([this](const auto& req, auto& res) {
      const auto svc = task(req);
      svc->authenticate_any(bearer_token(req));
      send_json(res, 200, to_json(svc->live_stats()));
    }));

    server.Get(R"(/tasks/([^/]+)/export)", guarded([this](const auto& req, auto& res) {
      const auto svc = task(req);
      svc->authenticate_any(bearer_token(req));
      const TaskExport ex = svc->export_task();
      send_json(res, 200,
                {{"complete", ex.complete}, {"annotations", ex.annotations_jsonl}, {"labeled", ex.labeled_jsonl}});
    }));

    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Authorization, Content-Type");
      res.status = 204;
    });
  }
};

AnnotationServer::AnnotationServer() : impl_(std::make_unique<Impl>()) { impl_->install(); }

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::add_task(std::shared_ptr<AnnotationService> service) {
  const std::string id = service->config().task_id;
  impl_->tasks[id] = std::move(service);
}

int AnnotationServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void AnnotationServer::serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace valence
