#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "../support/generators.hpp"
#include "../support/tempdir.hpp"
#include "cli.hpp"
#include "service.hpp"
#include "xpir/evalkit.hpp"
#include "xpir/profile.hpp"
#include "xpir/storage.hpp"

using namespace xpir;
using json = nlohmann::json;
using xpir::testing::data_path;
using xpir::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "xpir");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kOntology = data_path("ontologies/computer_science.json");

// Service over the fixture index with an empty profile directory.
struct Fixture {
  TempDir tmp;
  service::ServiceConfig config;
  std::unique_ptr<service::Service> svc;
  std::int64_t tick = 100;

  Fixture() {
    fs::create_directories(tmp.path / "profiles");
    fs::copy_file(data_path("golden/fixture.idx"), tmp.path / "fixture.idx");
    const json cfg = {{"port", 8080},
                      {"ontology", kOntology},
                      {"index", "fixture.idx"},
                      {"profiles", "profiles"},
                      {"search", {{"k", 0}}},
                      {"cors_origin", "http://localhost:5173"}};
    config = service::parse_service_config(cfg.dump(), tmp.path.string());
    svc = std::make_unique<service::Service>(config);
    svc->set_clock([this] { return tick++; });
  }

  service::Response post(std::string_view path, const json& body) {
    return svc->handle("POST", path, body.dump());
  }
  service::Response get(std::string_view path) { return svc->handle("GET", path, ""); }
};

}  // namespace

TEST_SUITE("server_cli") {

TEST_CASE("ontology check prints the worked example values") {
  const auto r = run({"ontology", "check", data_path("ontologies/generic7.json")});
  CHECK(r.code == 0);
  CHECK(r.out.find("delta     0.004444\n") != std::string::npos);
  CHECK(r.out.find("coef_avg  3.142857\n") != std::string::npos);
  CHECK(r.out.find("w_avg     0.142857\n") != std::string::npos);
  CHECK(r.out.find("sum_w_r   1.000000000\n") != std::string::npos);
  CHECK(r.out.find("granule\t5\t5.000000\t0.151111\n") != std::string::npos);

  TempDir tmp;
  std::ofstream(tmp.path / "bad.json") << R"({"name": "x", "concepts": [{"id": "a", "parents": ["a"]}]})";
  const auto bad = run({"ontology", "check", (tmp.path / "bad.json").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find('\n') == bad.err.size() - 1);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"ontology", "check"}).code == 1);
  CHECK(run({"search", "x.idx", "--ontology", kOntology, "--no-profile"}).code == 1);
  CHECK(run({"search", "x.idx", "--ontology", kOntology, "--query", "paging"}).code == 1);
  CHECK(run({"search", "x.idx", "--ontology", kOntology, "--no-profile", "--query", "a", "--concept", "b"})
            .code == 1);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("index build is reproducible and matches the golden file") {
  TempDir tmp;
  const auto a = (tmp.path / "a.idx").string();
  const auto b = (tmp.path / "b.idx").string();
  const auto corpus = data_path("corpus/fixture");
  REQUIRE(run({"index", "build", corpus, a, "--ontology", kOntology}).code == 0);
  REQUIRE(run({"index", "build", corpus, b, "--ontology", kOntology}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) == slurp(data_path("golden/fixture.idx")));
  CHECK(run({"index", "build", (tmp.path / "nope").string(), a, "--ontology", kOntology}).code == 2);
}

TEST_CASE("profile and search commands") {
  TempDir tmp;
  const auto profiles = (tmp.path / "p").string();
  fs::create_directories(profiles);
  const auto idx = data_path("golden/fixture.idx");

  CHECK(run({"profile", "create", "alice", "--profiles", profiles, "--ontology", kOntology}).code == 0);
  const auto dup = run({"profile", "create", "alice", "--profiles", profiles, "--ontology", kOntology});
  CHECK(dup.code == 2);
  CHECK(dup.err.find("duplicate") != std::string::npos);
  CHECK(run({"profile", "show", "bob", "--profiles", profiles, "--ontology", kOntology}).code == 2);

  const auto unknown = run({"search", idx, "--ontology", kOntology, "--profiles", profiles, "--user", "bob",
                            "--query", "paging"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("unknown user") != std::string::npos);
  CHECK(std::count(unknown.err.begin(), unknown.err.end(), '\n') == 1);

  const auto hit = run({"search", idx, "--ontology", kOntology, "--profiles", profiles, "--user", "alice",
                        "--query", "paging", "-k", "2"});
  REQUIRE(hit.code == 0);
  CHECK(hit.out ==
        "rank\tscore\tdoc\tstart\tend\ttype\tname\tconcepts\n"
        "1\t1.000000\tos_memory\t18\t19\ttext\t\tpaging\n"
        "2\t0.982076\tos_memory\t17\t26\telement\tpara\tpaging\n");

  const Ontology onto = load_ontology_file(kOntology);
  const UserProfile p = ProfileStore(profiles).load("alice", onto);
  REQUIRE(p.history.size() == 1);
  CHECK(interest_weight(p, "paging", onto) > 1.0 / static_cast<double>(onto.size()));

  const auto plain = run({"search", idx, "--ontology", kOntology, "--no-profile", "--query", "paging", "--json"});
  CHECK(plain.code == 0);
  CHECK(json::parse(plain.out).size() == 4);
  CHECK(ProfileStore(profiles).load("alice", onto).history.size() == 1);

  const auto empty = run({"search", idx, "--ontology", kOntology, "--no-profile", "--query", "hello"});
  CHECK(empty.code == 2);
  CHECK(empty.err.find("empty query") != std::string::npos);
}

TEST_CASE("eval run and gen corpus write their files") {
  TempDir tmp;
  const auto cfg = data_path("eval/default.json");
  const auto a = (tmp.path / "a.csv").string();
  const auto b = (tmp.path / "b.csv").string();
  const auto r1 = run({"eval", "run", cfg, "-o", a});
  REQUIRE(r1.code == 0);
  const auto r2 = run({"eval", "run", cfg, "-o", b});
  REQUIRE(r2.code == 0);
  CHECK(fs::file_size(a) > 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(r1.out == r2.out.substr(0, r2.out.rfind("report written")) + "report written to " + a + "\n");

  const auto out = (tmp.path / "gen").string();
  REQUIRE(run({"gen", "corpus", cfg, "--out", out}).code == 0);
  CHECK(read_corpus_dir(out + "/docs").size() == 40);
  std::ifstream q(out + "/qrels.txt");
  CHECK(read_qrels(q, Granularity::document).relevant.size() == 24);
  CHECK(run({"eval", "run", (tmp.path / "missing.json").string()}).code == 2);
}

TEST_CASE("service config validation") {
  TempDir tmp;
  fs::create_directories(tmp.path / "p");
  std::ofstream(tmp.path / "i.idx") << "x";
  const std::string base = tmp.path.string();
  auto code = [&](const json& j) {
    try {
      service::parse_service_config(j.dump(), base);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::internal_consistency;
  };
  const json ok = {{"ontology", kOntology}, {"index", "i.idx"}, {"profiles", "p"}};
  const auto c = service::parse_service_config(ok.dump(), base);
  CHECK(c.index_path == (tmp.path / "i.idx").string());
  CHECK(c.port == 8080);
  json j = ok;
  j["port"] = 0;
  CHECK(code(j) == Errc::config);
  j = ok;
  j["index"] = "missing.idx";
  CHECK(code(j) == Errc::config);
  j = ok;
  j["profiles"] = "nowhere";
  CHECK(code(j) == Errc::config);
  j = ok;
  j["colour"] = "blue";
  CHECK(code(j) == Errc::config);
  j = ok;
  j.erase("ontology");
  CHECK(code(j) == Errc::config);
  CHECK(service::load_service_config(data_path("service.json")).port == 8080);
}

TEST_CASE("registration and profile endpoints") {
  Fixture f;
  const auto first = f.post("/users", {{"user_id", "alice"}});
  CHECK(first.status == 201);
  CHECK(f.post("/users", {{"user_id", "alice"}}).status == 409);
  CHECK(f.post("/users", {{"user_id", "../x"}}).status == 400);
  CHECK(f.post("/users", {{"name", "alice"}}).status == 400);
  CHECK(f.svc->handle("POST", "/users", "{not json").status == 400);

  const auto prof = f.get("/users/alice/profile");
  REQUIRE(prof.status == 200);
  const json p = json::parse(prof.body);
  const double prior = 1.0 / static_cast<double>(f.svc->ontology().size());
  for (const auto& [id, w] : p.at("weights").items()) CHECK(w.get<double>() == prior);
  CHECK(p.at("history").empty());
  CHECK(f.get("/users/nobody/profile").status == 404);
  CHECK(f.get("/nowhere").status == 404);
  CHECK(f.svc->handle("DELETE", "/users", "").status == 405);
}

TEST_CASE("search answers first, then updates the profile") {
  Fixture f;
  REQUIRE(f.post("/users", {{"user_id", "alice"}}).status == 201);
  const Ontology& onto = f.svc->ontology();
  ProfileStore store(f.config.profile_dir);

  for (const char* text : {"paging and deadlock", "paging", "database"}) {
    UserProfile before = store.load("alice", onto);
    const auto res = f.post("/search", {{"user_id", "alice"}, {"query", text}});
    REQUIRE(res.status == 200);
    const json body = json::parse(res.body);

    // Same answer as the library against the pre-update profile.
    const SearchEngine engine(f.svc->index(), onto);
    Query q;
    q.raw_text = text;
    q.expansion = f.config.search.expansion;
    SearchOptions opts;
    opts.k = 0;
    const auto expected = search(engine, q, before, 0, opts);
    REQUIRE(body.at("results").size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const auto& r = body.at("results")[i];
      CHECK(r.at("doc") == expected[i].doc_name);
      CHECK(r.at("start") == expected[i].start);
      CHECK(r.at("end") == expected[i].end);
      CHECK(r.at("score").get<double>() == expected[i].score);
      CHECK(r.at("matched_concepts").size() == expected[i].matched_concepts.size());
    }
    // The stored profile is the library's post-update profile.
    const UserProfile after = store.load("alice", onto);
    CHECK(after.interests == before.interests);
  }

  const json p = json::parse(f.get("/users/alice/profile").body);
  const double prior = 1.0 / static_cast<double>(onto.size());
  CHECK(p.at("weights").at("paging").get<double>() > prior);
  CHECK(p.at("weights").at("deadlock").get<double>() > prior);
  CHECK(p.at("weights").at("sorting").get<double>() == prior);
  CHECK(p.at("history").size() == 3);
  CHECK(p.at("history")[0].at("timestamp") == 100);
}

TEST_CASE("failed searches leave the profile unchanged") {
  Fixture f;
  REQUIRE(f.post("/users", {{"user_id", "alice"}}).status == 201);
  const auto file = fs::path(f.config.profile_dir) / "alice.prof";
  const std::string before = slurp(file);

  CHECK(f.post("/search", {{"user_id", "alice"}, {"query", "nothing to see"}}).status == 422);
  CHECK(f.post("/search", {{"user_id", "alice"}, {"concept", "no_such_concept"}}).status == 400);
  CHECK(f.post("/search", {{"user_id", "alice"}, {"query", "paging"}, {"concept", "paging"}}).status == 400);
  CHECK(f.post("/search", {{"user_id", "alice"}}).status == 400);
  CHECK(f.post("/search", {{"user_id", "alice"}, {"query", "paging"}, {"k", -1}}).status == 400);
  CHECK(f.post("/search", {{"user_id", "alice"}, {"query", "paging"}, {"flags", {{"bogus", true}}}}).status ==
        400);
  CHECK(f.post("/search", {{"user_id", "bob"}, {"query", "paging"}}).status == 404);
  CHECK(slurp(file) == before);

  const auto quiet = f.post("/search", {{"user_id", "alice"}, {"query", "paging"},
                                        {"flags", {{"update_profile", false}}}});
  CHECK(quiet.status == 200);
  CHECK(slurp(file) == before);
  CHECK(!fs::exists(fs::path(f.config.profile_dir) / "bob.lock"));

  // A profile bound to another ontology is reported, not silently used.
  const Ontology other = load_ontology_file(data_path("ontologies/generic7.json"));
  ProfileStore(f.config.profile_dir).create(create_profile("carol", other));
  CHECK(f.post("/search", {{"user_id", "carol"}, {"query", "paging"}}).status == 409);
  CHECK(f.get("/users/carol/profile").status == 409);
}

TEST_CASE("seed concept search with expansion and k") {
  Fixture f;
  REQUIRE(f.post("/users", {{"user_id", "alice"}}).status == 201);
  const auto res = f.post("/search", {{"user_id", "alice"},
                                      {"concept", "operating_systems"},
                                      {"k", 3},
                                      {"expansion", {{"relations", json::array()}, {"max_hops", 1}}}});
  REQUIRE(res.status == 200);
  const json body = json::parse(res.body);
  CHECK(body.at("results").size() == 3);
  CHECK(body.at("query_vector").at("operating_systems") == 1.0);
  CHECK(body.at("query_vector").at("memory_management") == 0.5);
}

TEST_CASE("document node endpoint") {
  Fixture f;
  const auto res = f.get("/documents/os_memory/nodes/18");
  REQUIRE(res.status == 200);
  const json n = json::parse(res.body);
  CHECK(n.at("node").at("type") == "text");
  CHECK(n.at("node").at("parent") == 17);
  CHECK(n.at("text").get<std::string>().rfind("Paging maps pages", 0) == 0);
  REQUIRE(n.at("ancestors").size() == 3);
  CHECK(n.at("ancestors")[0].at("name") == "article");
  CHECK(n.at("ancestors")[2].at("start") == 17);
  CHECK(n.at("concepts").contains("paging"));

  const json e = json::parse(f.get("/documents/os_memory/nodes/17").body);
  CHECK(e.at("node").at("name") == "para");
  CHECK(e.at("children").size() == 3);
  CHECK(e.at("text").get<std::string>().find("OS kernel") != std::string::npos);
  CHECK(e.at("concepts").contains("paging"));

  CHECK(f.get("/documents/os_memory/nodes/999").status == 404);
  CHECK(f.get("/documents/os_memory/nodes/abc").status == 404);
  CHECK(f.get("/documents/missing/nodes/1").status == 404);
}

TEST_CASE("health reports the index fingerprints") {
  Fixture f;
  const auto res = f.get("/health");
  REQUIRE(res.status == 200);
  const json h = json::parse(res.body);
  CHECK(h.at("status") == "ok");
  CHECK(h.at("index").at("ontology_fingerprint") == f.svc->index().header.ontology_fingerprint);
  CHECK(h.at("ontology").at("fingerprint") == f.svc->ontology().fingerprint());
  CHECK(h.at("index").at("documents") == 3);
}

TEST_CASE("HTTP round trip with concurrent searches") {
  Fixture f;
  httplib::Server server;
  service::mount(server, *f.svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/users", R"({"user_id": "alice"})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(created->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  auto again = client.Post("/users", R"({"user_id": "alice"})", "application/json");
  REQUIRE(again);
  CHECK(again->status == 409);
  auto pre = client.Options("/search");
  REQUIRE(pre);
  CHECK(pre->status == 204);

  constexpr int kThreads = 4, kEach = 5;
  std::vector<std::thread> workers;
  std::atomic<int> ok{0};
  for (int t = 0; t < kThreads; ++t) {
    workers.emplace_back([&] {
      httplib::Client c("127.0.0.1", port);
      for (int i = 0; i < kEach; ++i) {
        auto r = c.Post("/search", R"({"user_id": "alice", "query": "paging", "k": 1})", "application/json");
        if (r && r->status == 200) ++ok;
      }
    });
  }
  for (auto& w : workers) w.join();
  CHECK(ok == kThreads * kEach);

  auto prof = client.Get("/users/alice/profile");
  REQUIRE(prof);
  CHECK(json::parse(prof->body).at("history").size() == kThreads * kEach);

  server.stop();
  listener.join();
}

}  // TEST_SUITE
