#pragma once

// Read-only HTTP view of one loaded bundle.
//
//   GET  /api/bundle   the bundle document
//   POST /api/predict  {"task", "p", "n"[, "form"]} -> {"value", "n_eff", "f"}
//
// Errors come back as {"code", "message"} with a 4xx status. Handlers only
// read the immutable bundle, so any number of requests may run concurrently.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "mixlaw/bundle.hpp"

namespace mixlaw {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class PredictionService {
 public:
  explicit PredictionService(LawBundle bundle);

  const LawBundle& bundle() const { return bundle_; }
  HttpResponse handle_bundle() const;
  HttpResponse handle_predict(std::string_view request_body) const;

 private:
  LawBundle bundle_;
  std::string document_;
};

class HttpServer {
 public:
  HttpServer(const PredictionService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws io_error when
  // the address is unavailable.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mixlaw
