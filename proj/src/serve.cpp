#include "mixlaw/serve.hpp"

#include "httplib.h"
#include "mixlaw/json_io.hpp"

namespace mixlaw {

using nlohmann::json;

namespace {

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, canonical_dump({{"code", code}, {"message", message}})};
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_task: return 404;
    case ErrorCode::parse_error: return 400;
    case ErrorCode::zero_shot:
    case ErrorCode::domain_error:
    case ErrorCode::invariant_violation: return 400;
    default: return 422;
  }
}

double required_number(const json& req, const char* key) {
  auto it = req.find(key);
  if (it == req.end() || !it->is_number())
    fail(ErrorCode::parse_error, std::string("request field '") + key + "' must be a number");
  return it->get<double>();
}

}  // namespace

PredictionService::PredictionService(LawBundle bundle)
    : bundle_(std::move(bundle)), document_(to_document(bundle_)) {}

HttpResponse PredictionService::handle_bundle() const { return {200, document_}; }

HttpResponse PredictionService::handle_predict(std::string_view request_body) const {
  try {
    json req;
    try {
      req = json::parse(request_body);
    } catch (const json::parse_error&) {
      fail(ErrorCode::parse_error, "request body is not valid JSON");
    }
    if (!req.is_object()) fail(ErrorCode::parse_error, "request body must be a JSON object");
    auto task_it = req.find("task");
    if (task_it == req.end() || !task_it->is_string())
      fail(ErrorCode::parse_error, "request field 'task' must be a string");
    const double p = required_number(req, "p");
    const double n = required_number(req, "n");
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::domain_error, "p must lie in [0, 1]");
    if (WeightKey::from_weight(p).micros() == 0) fail(ErrorCode::zero_shot, "zero-shot unsupported");
    if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorCode::domain_error, "n must be positive");

    const auto& task = bundle_.task(task_it->get<std::string>());
    const FractionCurveFit* fit = nullptr;
    if (auto form_it = req.find("form"); form_it != req.end()) {
      if (!form_it->is_string()) fail(ErrorCode::parse_error, "request field 'form' must be a string");
      const auto form = parse_fraction_form(form_it->get<std::string>());
      fit = task.fraction(form);
      if (!fit)
        fail(ErrorCode::missing_fraction_fit,
             "task '" + task.task().name + "' has no " + std::string(to_string(form)) + " fraction fit");
    } else {
      fit = task.fraction(FractionForm::flexible);
      if (!fit) fit = task.fraction(FractionForm::linear);
      if (!fit) fail(ErrorCode::missing_fraction_fit, "task '" + task.task().name + "' has no fraction fit");
    }
    const double f = eval_fraction_curve(fit->fit, p);
    const double value = predict_loss_any_weighting(task.single_task, fit->fit, p, ModelSize(n), bundle_.direction);
    return {200, canonical_dump({{"value", value}, {"n_eff", f * n}, {"f", f}})};
  } catch (const Error& e) {
    return error_response(status_for(e.code()), to_string(e.code()), e.what());
  }
}

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(const PredictionService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
  // SO_REUSEADDR only: with httplib's default SO_REUSEPORT a second server
  // could silently share a port that is already taken.
  impl_->server.set_socket_options([](int sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  auto reply = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  impl_->server.Get("/api/bundle", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.handle_bundle());
  });
  impl_->server.Post("/api/predict", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.handle_predict(req.body));
  });
  if (static_dir && !impl_->server.set_mount_point("/", static_dir->string()))
    fail(ErrorCode::io_error, "static directory '" + static_dir->string() + "' is not readable");
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::io_error, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    fail(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port) + " (port in use?)");
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace mixlaw
