#include "valuelens/review_server.hpp"

#include "httplib.h"

namespace valuelens::review {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store, std::string token, std::string cors_origin)
    : store_(store),
      token_(std::move(token)),
      cors_origin_(std::move(cors_origin)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) return -1;
  return port;
}

void ReviewServer::listen() { server_->listen_after_bind(); }

void ReviewServer::stop() {
  if (server_) server_->stop();
}

bool ReviewServer::running() const { return server_->is_running(); }

void ReviewServer::install_routes() {
  httplib::Server& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", cors_origin_},
                         {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});

  s.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (req.method == "OPTIONS" || req.path.rfind("/api/v1", 0) != 0) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (req.get_header_value("Authorization") != "Bearer " + token_) {
      send_error(res, 401, "missing or invalid bearer token");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const UnknownBatchError& e) {
      send_error(res, 404, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    } catch (...) {
      send_error(res, 500, "internal error");
    }
  });

  s.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  s.Get("/api/v1/batches", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& b : store_.batches()) {
      out.push_back({{"batch_id", b.batch_id}, {"seed", b.seed}, {"total", b.sent_ids.size()}});
    }
    send_json(res, 200, out);
  });

  s.Get(R"(/api/v1/batches/([^/]+)/next)",
        [this](const httplib::Request& req, httplib::Response& res) {
          const std::string annotator = req.get_param_value("annotator");
          if (annotator.empty()) return send_error(res, 400, "annotator query parameter is required");
          const auto item = store_.next_item(annotator, req.matches[1].str());
          if (!item) {
            res.status = 204;
            return;
          }
          send_json(res, 200, item_to_json(*item));
        });

  s.Get(R"(/api/v1/batches/([^/]+)/stats)",
        [this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, stats_to_json(store_.stats(req.matches[1].str())));
        });

  s.Get(R"(/api/v1/batches/([^/]+)/progress)",
        [this](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, progress_to_json(store_.progress(req.matches[1].str())));
        });

  s.Get(R"(/api/v1/items/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto item = store_.item(req.matches[1].str());
    if (!item) return send_error(res, 404, "no enqueued item " + req.matches[1].str());
    send_json(res, 200, item_to_json(*item));
  });

  s.Post("/api/v1/judgments", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return send_error(res, 400, "body must be a JSON object");
    for (const char* key : {"annotator_id", "sent_id", "label"}) {
      if (!body.contains(key) || !body[key].is_string()) {
        return send_error(res, 400, std::string(key) + " must be a string");
      }
    }
    std::optional<std::string> note;
    if (body.contains("note") && !body["note"].is_null()) {
      if (!body["note"].is_string()) return send_error(res, 400, "note must be a string");
      note = body["note"].get<std::string>();
    }
    const SubmitResult r = store_.submit(body["annotator_id"].get<std::string>(),
                                         body["sent_id"].get<std::string>(),
                                         body["label"].get<std::string>(), std::move(note));
    switch (r.status) {
      case SubmitStatus::accepted:
        return send_json(res, 201, judgment_to_json(*r.judgment));
      case SubmitStatus::conflict:
        return send_json(res, 409, json{{"error", r.message}, {"existing", judgment_to_json(*r.judgment)}});
      case SubmitStatus::not_found:
        return send_error(res, 404, r.message);
      case SubmitStatus::bad_request:
        return send_error(res, 400, r.message);
    }
  });
}

}  // namespace valuelens::review
