#include "service.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "xpir/error.hpp"
#include "xpir/profile.hpp"

namespace xpir::service {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, std::string_view where,
                    Errc code) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw Error(code, "unknown field '" + key + "' in " + std::string(where));
    }
  }
}

Expansion parse_expansion(const json& j, Errc code) {
  reject_unknown(j, {"relations", "max_hops"}, "expansion", code);
  Expansion e;
  e.relations = j.value("relations", std::vector<std::string>{});
  const auto hops = j.value("max_hops", std::int64_t{0});
  if (hops < 0) throw Error(code, "expansion.max_hops must be >= 0");
  e.max_hops = static_cast<std::uint32_t>(hops);
  return e;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

json vector_json(const ConceptVector& v, const Ontology& onto) {
  json out = json::object();
  for (const auto& [c, w] : v.entries()) out[onto.id_of(c)] = w;
  return out;
}

json node_json(const NodeDescriptor& n) {
  json out = {{"start", n.start},
              {"end", n.end},
              {"parent", n.parent},
              {"type", node_type_name(n.type)}};
  if (n.has_name()) out["name"] = n.name;
  if (n.has_value()) out["value"] = n.value;
  return out;
}

Response error_response(int status, std::string_view kind, const std::string& message) {
  return {status, json{{"error", kind}, {"message", message}}.dump()};
}

Response error_response(const Error& e) {
  return error_response(http_status(e.code()), errc_name(e.code()), e.what());
}

json parse_body(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::parse, "malformed JSON body");
  if (!j.is_object()) throw Error(Errc::parse, "request body must be a JSON object");
  return j;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    if (path.front() == '/') {
      path.remove_prefix(1);
      continue;
    }
    const auto slash = path.find('/');
    parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash);
  }
  return parts;
}

std::int64_t wall_clock() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

ServiceConfig parse_service_config(std::string_view json_text, const std::string& base_dir) {
  const json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::parse, "service config is not a JSON object");
  try {
    reject_unknown(j, {"host", "port", "ontology", "index", "profiles", "search", "cors_origin"},
                   "service config", Errc::config);
    ServiceConfig c;
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.ontology_path = resolve(base_dir, j.at("ontology").get<std::string>());
    c.index_path = resolve(base_dir, j.at("index").get<std::string>());
    c.profile_dir = resolve(base_dir, j.at("profiles").get<std::string>());
    c.cors_origin = j.value("cors_origin", std::string{});
    if (j.contains("search")) {
      const auto& s = j.at("search");
      reject_unknown(s, {"k", "overlap_filter", "normalize_profile", "expansion"}, "search",
                     Errc::config);
      const auto k = s.value("k", std::int64_t{10});
      if (k < 0) throw Error(Errc::config, "search.k must be >= 0");
      c.search.k = static_cast<std::size_t>(k);
      c.search.overlap_filter = s.value("overlap_filter", false);
      c.search.normalize_profile = s.value("normalize_profile", false);
      if (s.contains("expansion")) c.search.expansion = parse_expansion(s.at("expansion"), Errc::config);
    }
    if (c.port < 1 || c.port > 65535) {
      throw Error(Errc::config, "port " + std::to_string(c.port) + " out of range");
    }
    for (const auto* p : {&c.ontology_path, &c.index_path}) {
      if (!fs::is_regular_file(*p)) throw Error(Errc::config, "'" + *p + "' does not exist");
    }
    if (!fs::is_directory(c.profile_dir)) {
      throw Error(Errc::config, "profile directory '" + c.profile_dir + "' does not exist");
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("service config: ") + e.what());
  }
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_service_config(buf.str(), fs::path(path).parent_path().string());
}

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::parse:
    case Errc::validation:
    case Errc::invalid_argument:
    case Errc::unknown_concept:
    case Errc::unknown_relation:
    case Errc::config:
      return 400;
    case Errc::not_found:
      return 404;
    case Errc::stale_profile:
    case Errc::stale_index:
    case Errc::duplicate:
    case Errc::contention:
      return 409;
    case Errc::empty_query:
      return 422;
    default:
      return 500;
  }
}

Service::Service(const ServiceConfig& config)
    : config_(config),
      ontology_(std::make_unique<Ontology>(load_ontology_file(config.ontology_path))),
      store_(config.profile_dir),
      clock_(wall_clock) {
  index_ = std::make_unique<IndexStore>(load_index(config.index_path, *ontology_));
  // Weighting of the index decides the concept weights used for queries too.
  if (index_->header.weighting != ontology_->scheme()) {
    ontology_ = std::make_unique<Ontology>(ontology_->with_scheme(index_->header.weighting));
  }
  engine_ = std::make_unique<SearchEngine>(*index_, *ontology_);
}

Response Service::handle(std::string_view method, std::string_view path, std::string_view body) {
  const auto parts = split_path(path);
  try {
    if (parts.size() == 1 && parts[0] == "health") {
      if (method == "GET") return health();
    } else if (parts.size() == 1 && parts[0] == "users") {
      if (method == "POST") return create_user(body);
    } else if (parts.size() == 3 && parts[0] == "users" && parts[2] == "profile") {
      if (method == "GET") return get_profile(parts[1]);
    } else if (parts.size() == 1 && parts[0] == "search") {
      if (method == "POST") return run_search(body);
    } else if (parts.size() == 4 && parts[0] == "documents" && parts[2] == "nodes") {
      if (method == "GET") return get_node(parts[1], parts[3]);
    } else {
      return error_response(404, "not found", "no route for '" + std::string(path) + "'");
    }
    return error_response(405, "method not allowed",
                          std::string(method) + " not allowed on '" + std::string(path) + "'");
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return error_response(400, "parse error", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal error", e.what());
  }
}

Response Service::create_user(std::string_view body) {
  const json req = parse_body(body);
  reject_unknown(req, {"user_id"}, "request", Errc::parse);
  if (!req.contains("user_id") || !req.at("user_id").is_string()) {
    throw Error(Errc::parse, "user_id (string) is required");
  }
  const auto id = req.at("user_id").get<std::string>();
  if (!ProfileStore::valid_user_id(id)) throw Error(Errc::invalid_argument, "invalid user id '" + id + "'");
  const UserProfile p = create_profile(id, *ontology_);
  store_.create(p);
  return {201, profile_to_json(p, *ontology_)};
}

Response Service::get_profile(std::string_view user_id) {
  if (!ProfileStore::valid_user_id(user_id)) {
    throw Error(Errc::not_found, "unknown user '" + std::string(user_id) + "'");
  }
  return {200, profile_to_json(store_.load(user_id, *ontology_), *ontology_)};
}

Response Service::run_search(std::string_view body) {
  const json req = parse_body(body);
  reject_unknown(req, {"user_id", "query", "concept", "k", "flags", "expansion"}, "request",
                 Errc::parse);
  if (!req.contains("user_id") || !req.at("user_id").is_string()) {
    throw Error(Errc::parse, "user_id (string) is required");
  }
  const auto user = req.at("user_id").get<std::string>();
  if (req.contains("query") == req.contains("concept")) {
    throw Error(Errc::parse, "exactly one of query and concept is required");
  }

  Query query;
  if (req.contains("query")) {
    query.raw_text = req.at("query").get<std::string>();
  } else {
    query.seed_concept = req.at("concept").get<std::string>();
  }
  query.expansion = req.contains("expansion") ? parse_expansion(req.at("expansion"), Errc::parse)
                                              : config_.search.expansion;

  SearchOptions opts;
  opts.k = config_.search.k;
  opts.overlap_filter = config_.search.overlap_filter;
  opts.normalize_profile = config_.search.normalize_profile;
  if (req.contains("k")) {
    const auto k = req.at("k").get<std::int64_t>();
    if (k < 0) throw Error(Errc::parse, "k must be >= 0");
    opts.k = static_cast<std::size_t>(k);
  }
  bool update = true;
  if (req.contains("flags")) {
    const auto& f = req.at("flags");
    reject_unknown(f, {"use_profile", "update_profile", "overlap_filter", "normalize_profile"},
                   "flags", Errc::parse);
    opts.use_profile = f.value("use_profile", opts.use_profile);
    opts.overlap_filter = f.value("overlap_filter", opts.overlap_filter);
    opts.normalize_profile = f.value("normalize_profile", opts.normalize_profile);
    update = f.value("update_profile", update);
  }
  if (!ProfileStore::valid_user_id(user) || !store_.exists(user)) {
    throw Error(Errc::not_found, "unknown user '" + user + "'");
  }

  // Fails before touching the profile when the query is unusable.
  const ConceptVector qv = build_query_vector(query, *ontology_);

  std::vector<RankedResult> results;
  if (update) {
    store_.modify(user, *ontology_, [&](UserProfile& p) {
      std::int64_t ts = clock_();
      if (!p.history.empty()) ts = std::max(ts, p.history.back().timestamp);
      results = search(*engine_, query, p, ts, opts);
    });
  } else {
    const UserProfile p = store_.load(user, *ontology_);
    results = engine_->rank(qv, &p, opts);
  }

  json out_results = json::array();
  for (const auto& r : results) {
    json concepts = json::array();
    for (ConceptIndex c : r.matched_concepts) concepts.push_back(ontology_->id_of(c));
    json item = {{"doc", r.doc_name},
                 {"doc_id", r.doc},
                 {"start", r.start},
                 {"end", r.end},
                 {"type", node_type_name(r.type)},
                 {"score", r.score},
                 {"matched_concepts", std::move(concepts)}};
    if (r.type != NodeType::text) item["name"] = r.name;
    out_results.push_back(std::move(item));
  }
  json out = {{"user_id", user},
              {"query_vector", vector_json(qv, *ontology_)},
              {"profile_updated", update},
              {"results", std::move(out_results)}};
  return {200, out.dump()};
}

Response Service::get_node(std::string_view doc, std::string_view start_text) {
  const DocumentTree* tree = index_->find_document(doc);
  if (tree == nullptr) throw Error(Errc::not_found, "unknown document '" + std::string(doc) + "'");
  std::uint32_t start = 0;
  const auto [ptr, ec] = std::from_chars(start_text.data(), start_text.data() + start_text.size(), start);
  const NodeDescriptor* node = nullptr;
  if (ec == std::errc{} && ptr == start_text.data() + start_text.size()) node = tree->find(start);
  if (node == nullptr) {
    throw Error(Errc::not_found, "document '" + std::string(doc) + "' has no node " + std::string(start_text));
  }

  json ancestors = json::array();
  for (auto p = node->parent; p != 0;) {
    const NodeDescriptor* a = tree->find(p);
    ancestors.push_back({{"start", a->start}, {"end", a->end}, {"name", a->name}});
    p = a->parent;
  }
  std::reverse(ancestors.begin(), ancestors.end());

  json children = json::array();
  std::string text;
  ConceptVector concepts;
  if (node->type == NodeType::element) {
    const auto [first, last] = tree->subtree_range(*node);
    const auto nodes = tree->descriptors();
    for (std::size_t i = first; i < last; ++i) {
      const auto& d = nodes[i];
      if (d.parent == node->start) children.push_back(node_json(d));
      if (d.type == NodeType::text) {
        if (!text.empty()) text += ' ';
        text += d.value;
      }
    }
    for (const auto& e : index_->elements_of(tree->doc())) {
      if (e.start == node->start) concepts = e.base;
    }
  } else {
    text = node->value;
    for (const auto& t : index_->texts_of(tree->doc())) {
      if (t.start == node->start) concepts = t.vector;
    }
  }

  json out = {{"doc", tree->name()},
              {"doc_id", tree->doc()},
              {"node", node_json(*node)},
              {"ancestors", std::move(ancestors)},
              {"children", std::move(children)},
              {"text", text},
              {"concepts", vector_json(concepts, *ontology_)}};
  return {200, out.dump()};
}

Response Service::health() const {
  const auto& h = index_->header;
  json out = {
      {"status", "ok"},
      {"version", kVersion},
      {"ontology",
       {{"name", ontology_->name()},
        {"fingerprint", ontology_->fingerprint()},
        {"concepts", ontology_->size()}}},
      {"index",
       {{"ontology_fingerprint", h.ontology_fingerprint},
        {"weighting", h.weighting == WeightingScheme::depth ? "depth" : "uniform"},
        {"build_timestamp", h.build_timestamp},
        {"documents", index_->documents.size()},
        {"elements", index_->elements.size()},
        {"text_nodes", index_->texts.size()}}},
  };
  return {200, out.dump()};
}

void mount(httplib::Server& server, Service& service) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const Response r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get(".*", forward);
  server.Post(".*", forward);
  server.Put(".*", forward);
  server.Delete(".*", forward);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  const std::string origin = service.config().cors_origin;
  if (!origin.empty()) {
    server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
  }
}

bool serve(Service& service) {
  httplib::Server server;
  mount(server, service);
  return server.listen(service.config().host, service.config().port);
}

}  // namespace xpir::service
