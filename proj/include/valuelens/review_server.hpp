#pragma once

#include <memory>
#include <string>

#include "valuelens/review.hpp"

namespace httplib {
class Server;
}

namespace valuelens::review {

// JSON API under /api/v1. Every /api/v1 request except CORS preflight must
// carry "Authorization: Bearer <token>"; otherwise 401.
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, std::string token, std::string cors_origin = "*");
  ~ReviewServer();

  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Port 0 binds an ephemeral port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  bool running() const;

 private:
  void install_routes();

  ReviewStore& store_;
  std::string token_;
  std::string cors_origin_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace valuelens::review
