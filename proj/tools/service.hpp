#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "xpir/concept_index.hpp"
#include "xpir/error.hpp"
#include "xpir/ontology.hpp"
#include "xpir/retrieval.hpp"
#include "xpir/storage.hpp"

namespace httplib {
class Server;
}

namespace xpir::service {

inline constexpr std::string_view kVersion = "0.1.0";

struct SearchDefaults {
  std::size_t k = 10;
  bool overlap_filter = false;
  bool normalize_profile = false;
  Expansion expansion;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ontology_path;
  std::string index_path;
  std::string profile_dir;
  SearchDefaults search;
  std::string cors_origin;  // empty: no CORS headers
};

// Relative paths resolve against the config file's directory. Throws
// Error{config} for unknown fields, a bad port or a missing path.
ServiceConfig load_service_config(const std::string& path);
ServiceConfig parse_service_config(std::string_view json_text, const std::string& base_dir);

struct Response {
  int status = 200;
  std::string body;  // JSON
};

/// HTTP semantics without the socket: the httplib layer only forwards
/// method, path and body here. Safe to call from several threads.
class Service {
 public:
  explicit Service(const ServiceConfig& config);
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Response handle(std::string_view method, std::string_view path, std::string_view body);

  const Ontology& ontology() const noexcept { return *ontology_; }
  const IndexStore& index() const noexcept { return *index_; }
  const ServiceConfig& config() const noexcept { return config_; }

  // Seconds since the epoch by default; tests substitute a counter.
  void set_clock(std::function<std::int64_t()> clock) { clock_ = std::move(clock); }

 private:
  Response create_user(std::string_view body);
  Response get_profile(std::string_view user_id);
  Response run_search(std::string_view body);
  Response get_node(std::string_view doc, std::string_view start);
  Response health() const;

  ServiceConfig config_;
  std::unique_ptr<Ontology> ontology_;
  std::unique_ptr<IndexStore> index_;
  std::unique_ptr<SearchEngine> engine_;
  ProfileStore store_;
  std::function<std::int64_t()> clock_;
};

int http_status(Errc code) noexcept;

// Routes every request of `server` to `service`, adding CORS headers when
// configured.
void mount(httplib::Server& server, Service& service);

// Blocks until the server stops. Returns false if the address cannot be bound.
bool serve(Service& service);

}  // namespace xpir::service
