#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "coderoute/router.hpp"

namespace httplib {
class Server;
}
namespace spdlog {
class logger;
}

namespace coderoute::tools {

struct Backend {
  std::string base_url;  // scheme://host[:port][/prefix]; requests go to <prefix>/v1/chat/completions
  double timeout_s = 30.0;
};

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  RouterArtifactPaths artifacts;
  std::optional<EmbedderProvider> embedder;  // default: provider recorded in projection.json
  std::map<std::string, Backend> backends;
  int threads = 8;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// CODEROUTE_BACKEND_<ID>_URL, with the model id upper-cased and every
// character outside [A-Z0-9] replaced by '_'.
std::string backend_env_name(std::string_view model_id);

// Relative paths resolve against the config file's directory. Throws
// SchemaError on malformed documents.
GatewayConfig parse_gateway_config(const Json& doc, const std::filesystem::path& base_dir);
GatewayConfig load_gateway_config(const std::filesystem::path& path);

// CODEROUTE_LISTEN=host:port and per-model backend URLs. Models without a
// configured backend get one when their variable is set.
void apply_env_overrides(GatewayConfig& config, std::span<const std::string> model_ids,
                         const EnvLookup& env = process_env);

// HTTP front end over one immutable Router. Handlers only read shared state,
// so requests run concurrently without locks.
class GatewayService {
 public:
  explicit GatewayService(GatewayConfig config, std::shared_ptr<spdlog::logger> logger = nullptr);
  ~GatewayService();
  GatewayService(const GatewayService&) = delete;
  GatewayService& operator=(const GatewayService&) = delete;

  // Loads and version-checks every artifact; /healthz answers 503 until this
  // returns. Throws DataError on bad artifacts.
  void warm();
  // Uses an already loaded router instead of the configured artifacts.
  void warm(Router router);
  bool ready() const noexcept { return ready_.load(); }

  // Port 0 binds any free port. Returns the bound port or -1.
  int bind();
  // Blocks until stop().
  bool run();
  void stop();
  // Blocks until the listener accepts connections.
  void wait_until_listening() const;

  const GatewayConfig& config() const noexcept { return config_; }

 private:
  void install_routes();

  GatewayConfig config_;
  std::shared_ptr<spdlog::logger> log_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<const Router> router_;
  std::atomic<bool> ready_{false};
};

// Logger with UTC ISO-8601 timestamps on stderr.
std::shared_ptr<spdlog::logger> make_logger(const std::string& name);

}  // namespace coderoute::tools
