#include "coderoute/tools/service.hpp"

#include <httplib.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace coderoute::tools {

namespace fs = std::filesystem;

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
  return std::nullopt;
}

std::string backend_env_name(std::string_view model_id) {
  std::string out = "CODEROUTE_BACKEND_";
  for (char c : model_id) {
    const auto u = static_cast<unsigned char>(c);
    out += std::isalnum(u) ? static_cast<char>(std::toupper(u)) : '_';
  }
  return out + "_URL";
}

namespace {

void parse_listen(std::string_view text, GatewayConfig& config, std::string_view where) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw DataError(ErrorCode::SchemaError, std::string(where) + ": listen must be host:port");
  }
  int port = -1;
  try {
    std::size_t used = 0;
    const std::string digits(text.substr(colon + 1));
    port = std::stoi(digits, &used);
    if (used != digits.size()) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) {
    throw DataError(ErrorCode::SchemaError, std::string(where) + ": bad port in '" + std::string(text) + "'");
  }
  config.host = std::string(text.substr(0, colon));
  config.port = port;
}

template <typename T>
std::optional<T> maybe(const Json& obj, std::string_view key, std::string_view context) {
  if (!obj.is_object() || !obj.contains(std::string(key))) return std::nullopt;
  return require<T>(obj, key, context);
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() ? p : base / p; }

Json error_body(std::string_view error, std::string_view detail) {
  return {{"error", std::string(error)}, {"detail", std::string(detail)}};
}

// "http://host:port/prefix" -> {"http://host:port", "/prefix"}.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

GatewayConfig parse_gateway_config(const Json& doc, const fs::path& base_dir) {
  constexpr std::string_view where = "gateway config";
  if (!doc.is_object()) throw DataError(ErrorCode::SchemaError, "gateway config: expected a JSON object");
  GatewayConfig c;
  if (auto v = maybe<std::string>(doc, "listen", where)) parse_listen(*v, c, where);
  if (auto v = maybe<int>(doc, "threads", where)) {
    if (*v < 1) throw DataError(ErrorCode::SchemaError, "gateway config: threads must be positive");
    c.threads = *v;
  }
  if (auto v = maybe<std::string>(doc, "embedder", where)) {
    c.embedder = parse_provider(*v);
    if (!c.embedder) throw DataError(ErrorCode::SchemaError, "gateway config: unknown embedder '" + *v + "'");
  }

  const Json& art = require<Json>(doc, "artifacts", where);
  if (auto dir = maybe<std::string>(art, "dir", "artifacts")) {
    c.artifacts = RouterArtifactPaths::in_directory(resolve(*dir, base_dir));
  }
  auto path_field = [&](const char* key, fs::path& slot) {
    if (auto v = maybe<std::string>(art, key, "artifacts")) slot = resolve(*v, base_dir);
  };
  auto optional_path = [&](const char* key, std::optional<fs::path>& slot) {
    if (auto v = maybe<std::string>(art, key, "artifacts")) slot = resolve(*v, base_dir);
  };
  path_field("projection", c.artifacts.projection);
  path_field("classifier", c.artifacts.classifier);
  path_field("pricing", c.artifacts.pricing);
  optional_path("difficulty", c.artifacts.difficulty);
  optional_path("embeddings", c.artifacts.embeddings);
  optional_path("tier_classifier", c.artifacts.tier_classifier);
  if (c.artifacts.projection.empty() || c.artifacts.classifier.empty() || c.artifacts.pricing.empty()) {
    throw DataError(ErrorCode::SchemaError,
                    "gateway config: artifacts needs dir or projection, classifier and pricing");
  }

  if (auto it = doc.find("backends"); it != doc.end()) {
    if (!it->is_object()) throw DataError(ErrorCode::SchemaError, "gateway config: backends must be an object");
    for (const auto& [model, entry] : it->items()) {
      Backend b;
      b.base_url = require<std::string>(entry, "base_url", model);
      if (auto t = maybe<double>(entry, "timeout_s", model)) {
        if (!(*t > 0.0) || !std::isfinite(*t)) {
          throw DataError(ErrorCode::SchemaError, model + ": timeout_s must be positive");
        }
        b.timeout_s = *t;
      }
      c.backends[model] = std::move(b);
    }
  }
  return c;
}

GatewayConfig load_gateway_config(const fs::path& path) {
  return parse_gateway_config(read_json_file(path), fs::absolute(path).parent_path());
}

void apply_env_overrides(GatewayConfig& config, std::span<const std::string> model_ids, const EnvLookup& env) {
  if (auto listen = env("CODEROUTE_LISTEN")) parse_listen(*listen, config, "CODEROUTE_LISTEN");
  std::vector<std::string> ids(model_ids.begin(), model_ids.end());
  for (const auto& [model, b] : config.backends) ids.push_back(model);
  for (const auto& model : ids) {
    if (auto url = env(backend_env_name(model))) config.backends[model].base_url = *url;
  }
}

std::shared_ptr<spdlog::logger> make_logger(const std::string& name) {
  auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  auto logger = std::make_shared<spdlog::logger>(name, sink);
  logger->set_pattern("%Y-%m-%dT%H:%M:%S.%eZ %l %v", spdlog::pattern_time_type::utc);
  return logger;
}

GatewayService::GatewayService(GatewayConfig config, std::shared_ptr<spdlog::logger> logger)
    : config_(std::move(config)),
      log_(logger ? std::move(logger) : make_logger("gateway")),
      server_(std::make_unique<httplib::Server>()) {
  const int threads = config_.threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  install_routes();
}

GatewayService::~GatewayService() { stop(); }

void GatewayService::warm() {
  auto router = Router::load(config_.artifacts, config_.embedder);
  warm(std::move(router));
}

void GatewayService::warm(Router router) {
  apply_env_overrides(config_, router.pool().model_ids());
  for (const auto& [model, b] : config_.backends) {
    if (!router.pool().index_of(model)) log_->warn("backend for unpriced model {} is ignored", model);
  }
  router_ = std::make_unique<const Router>(std::move(router));
  ready_.store(true, std::memory_order_release);
  log_->info("artifacts loaded: {} models, embedder {}", router_->pool().size(),
             provider_name(router_->embedder().provider()));
}

int GatewayService::bind() {
  if (config_.port == 0) {
    const int port = server_->bind_to_any_port(config_.host);
    if (port > 0) config_.port = port;
    return port > 0 ? port : -1;
  }
  return server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
}

bool GatewayService::run() {
  log_->info("listening on {}:{}", config_.host, config_.port);
  return server_->listen_after_bind();
}

void GatewayService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void GatewayService::wait_until_listening() const { server_->wait_until_ready(); }

void GatewayService::install_routes() {
  auto& s = *server_;

  s.set_logger([log = log_](const httplib::Request& req, const httplib::Response& res) {
    log->info("{} {} {} {}", req.remote_addr, req.method, req.path, res.status);
  });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    reply(res, res.status, error_body(res.status == 404 ? "not_found" : "http_error", req.path));
  });
  s.set_exception_handler([log = log_](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "unknown error";
    int status = 500;
    std::string code = "internal";
    try {
      std::rethrow_exception(ep);
    } catch (const DataError& e) {
      detail = e.what();
      code = std::string(error_code_name(e.code()));
      status = 422;
    } catch (const std::exception& e) {
      detail = e.what();
    }
    log->error("request failed: {}", detail);
    reply(res, status, error_body(code, detail));
  });

  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    if (!ready()) return reply(res, 503, {{"status", "loading"}});
    reply(res, 200, {{"status", "ok"}});
  });

  s.Get("/v1/models", [this](const httplib::Request&, httplib::Response& res) {
    if (!ready()) return reply(res, 503, error_body("not_ready", "artifacts are loading"));
    Json models = Json::array();
    for (const auto& m : router_->pool().models()) {
      Json row = {{"model_id", m.model_id},
                  {"price_per_mtok", m.price_per_mtok},
                  {"backend", config_.backends.count(m.model_id) > 0}};
      if (m.params_b) row["params_b"] = *m.params_b;
      models.push_back(std::move(row));
    }
    reply(res, 200, {{"models", std::move(models)}, {"sample_count", router_->pool().sample_count()}});
  });

  // Shared by /v1/route and /v1/generate: parses the body and routes it.
  auto decide = [this](const httplib::Request& req, httplib::Response& res, Json& body) -> std::optional<RouteDecision> {
    if (!ready()) {
      reply(res, 503, error_body("not_ready", "artifacts are loading"));
      return std::nullopt;
    }
    body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      reply(res, 400, error_body("bad_request", "body must be a JSON object"));
      return std::nullopt;
    }
    auto it = body.find("prompt");
    if (it == body.end() || !it->is_string()) {
      reply(res, 400, error_body("bad_request", "missing string field 'prompt'"));
      return std::nullopt;
    }
    std::optional<std::string> problem_id;
    if (auto p = body.find("problem_id"); p != body.end()) {
      if (!p->is_string()) {
        reply(res, 400, error_body("bad_request", "'problem_id' must be a string"));
        return std::nullopt;
      }
      problem_id = p->get<std::string>();
    }
    const auto prompt = it->get<std::string>();
    return router_->route(prompt, problem_id ? std::optional<std::string_view>(*problem_id) : std::nullopt);
  };

  s.Post("/v1/route", [decide](const httplib::Request& req, httplib::Response& res) {
    Json body;
    if (auto d = decide(req, res, body)) reply(res, 200, to_json(*d));
  });

  s.Post("/v1/generate", [this, decide](const httplib::Request& req, httplib::Response& res) {
    Json body;
    auto d = decide(req, res, body);
    if (!d) return;
    const Json route = to_json(*d);
    auto backend = config_.backends.find(d->model_id);
    if (backend == config_.backends.end() || backend->second.base_url.empty()) {
      Json err = error_body("no_backend", "no backend configured for " + d->model_id);
      err["route"] = route;
      return reply(res, 502, err);
    }

    Json chat = {{"model", d->model_id},
                 {"messages", Json::array({{{"role", "user"}, {"content", body["prompt"]}}})}};
    for (const char* key : {"max_tokens", "temperature", "top_p", "stop"}) {
      if (auto v = body.find(key); v != body.end()) chat[key] = *v;
    }

    try {
      const auto [origin, prefix] = split_base_url(backend->second.base_url);
      httplib::Client client(origin);
      const double t = backend->second.timeout_s;
      const auto sec = static_cast<time_t>(t);
      const auto usec = static_cast<time_t>((t - static_cast<double>(sec)) * 1e6);
      client.set_connection_timeout(sec, usec);
      client.set_read_timeout(sec, usec);
      client.set_write_timeout(sec, usec);
      auto result = client.Post(prefix + "/v1/chat/completions", chat.dump(), "application/json");
      if (!result) {
        Json err = error_body("backend_unreachable", httplib::to_string(result.error()));
        err["route"] = route;
        return reply(res, 502, err);
      }
      if (result->status < 200 || result->status >= 300) {
        Json err = error_body("backend_error", "backend answered " + std::to_string(result->status));
        err["route"] = route;
        err["backend_body"] = result->body;
        return reply(res, 502, err);
      }
      Json completion = Json::parse(result->body, nullptr, false);
      if (completion.is_discarded()) {
        Json err = error_body("backend_error", "backend returned invalid JSON");
        err["route"] = route;
        return reply(res, 502, err);
      }
      reply(res, 200, {{"route", route}, {"completion", std::move(completion)}});
    } catch (const std::exception& e) {
      Json err = error_body("backend_unreachable", e.what());
      err["route"] = route;
      reply(res, 502, err);
    }
  });
}

}  // namespace coderoute::tools
