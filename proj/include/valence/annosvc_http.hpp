#pragma once

#include <map>
#include <memory>
#include <string>

#include "valence/annosvc.hpp"

namespace valence {

/// HTTP front end for one or more annotation tasks.
///
///   GET  /tasks/{id}/next?annotator=A     -> chunk payload or {"done": true}
///   POST /tasks/{id}/annotations          {annotator, chunk_id, label}
///                                         or {annotator, chunk_id, skip: true, reason}
///   GET  /tasks/{id}/stats
///   GET  /tasks/{id}/export               -> {annotations, labeled, complete}
///
/// Requests carry "Authorization: Bearer <token>". Errors are
/// {"error_code", "message"} with a matching status.
class AnnotationServer {
 public:
  AnnotationServer();
  ~AnnotationServer();

  void add_task(std::shared_ptr<AnnotationService> service);

  /// Binds and returns the port (0 picks a free one). Throws on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace valence
