#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "service.hpp"
#include "xpir/error.hpp"
#include "xpir/evalkit.hpp"
#include "xpir/profile.hpp"
#include "xpir/retrieval.hpp"
#include "xpir/storage.hpp"

namespace xpir::cli {

namespace fs = std::filesystem;

namespace {

WeightingScheme parse_scheme(const std::string& s) {
  return s == "uniform" ? WeightingScheme::uniform : WeightingScheme::depth;
}

Ontology load_with_scheme(const std::string& path, const std::string& scheme) {
  Ontology onto = load_ontology_file(path);
  const auto ws = parse_scheme(scheme);
  return ws == onto.scheme() ? onto : onto.with_scheme(ws);
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << bytes;
  f.close();
  if (!f) throw Error(Errc::io, "cannot write '" + path.string() + "'");
}

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void ontology_check(const std::string& file, const std::string& scheme, std::ostream& out) {
  const Ontology onto = load_with_scheme(file, scheme);
  double sum = 0.0;
  for (double w : onto.weights()) sum += w;
  out << "ontology " << onto.name() << ": " << onto.size() << " concepts, fingerprint "
      << onto.fingerprint() << ", weighting " << scheme << '\n';
  out << std::fixed << std::setprecision(6);
  out << "delta     ";
  if (onto.margin()) {
    out << *onto.margin() << '\n';
  } else {
    out << "undefined\n";
  }
  out << "coef_avg  " << onto.avg_coefficient() << '\n';
  out << "w_avg     " << onto.avg_weight() << '\n';
  out << "sum_w_r   " << std::setprecision(9) << sum << std::setprecision(6) << '\n';
  out << "id\tdepth\tcoef\tw_r\n";
  for (ConceptIndex c = 0; c < onto.size(); ++c) {
    out << onto.id_of(c) << '\t' << onto.depth(c) << '\t' << onto.coefficient(c) << '\t'
        << onto.weight(c) << '\n';
  }
}

struct SearchArgs {
  std::string index_path, ontology_path, profile_dir, user, text, concept_id;
  std::size_t k = 10;
  bool no_profile = false, overlap = false, normalize = false, as_json = false;
  std::vector<std::string> relations;
  std::uint32_t hops = 0;
};

void run_search(const SearchArgs& a, std::ostream& out) {
  Ontology onto = load_ontology_file(a.ontology_path);
  const IndexStore index = load_index(a.index_path, onto);
  if (index.header.weighting != onto.scheme()) onto = onto.with_scheme(index.header.weighting);
  const SearchEngine engine(index, onto);

  Query q;
  if (!a.concept_id.empty()) {
    q.seed_concept = a.concept_id;
  } else {
    q.raw_text = a.text;
  }
  q.expansion = {a.relations, a.hops};
  SearchOptions opts;
  opts.k = a.k;
  opts.overlap_filter = a.overlap;
  opts.normalize_profile = a.normalize;
  opts.use_profile = !a.no_profile;

  const ConceptVector qv = build_query_vector(q, onto);
  std::vector<RankedResult> results;
  if (a.no_profile) {
    results = engine.rank(qv, nullptr, opts);
  } else {
    ProfileStore store(a.profile_dir);
    if (!ProfileStore::valid_user_id(a.user) || !store.exists(a.user)) {
      throw Error(Errc::not_found, "unknown user '" + a.user + "'");
    }
    store.modify(a.user, onto, [&](UserProfile& p) {
      std::int64_t ts = now_seconds();
      if (!p.history.empty()) ts = std::max(ts, p.history.back().timestamp);
      results = search(engine, q, p, ts, opts);
    });
  }

  if (a.as_json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : results) {
      nlohmann::json concepts = nlohmann::json::array();
      for (ConceptIndex c : r.matched_concepts) concepts.push_back(onto.id_of(c));
      arr.push_back({{"doc", r.doc_name}, {"start", r.start}, {"end", r.end},
                     {"type", node_type_name(r.type)}, {"name", r.name}, {"score", r.score},
                     {"matched_concepts", concepts}});
    }
    out << arr.dump(2) << '\n';
    return;
  }
  out << "rank\tscore\tdoc\tstart\tend\ttype\tname\tconcepts\n";
  out << std::fixed << std::setprecision(6);
  std::size_t rank = 0;
  for (const auto& r : results) {
    out << ++rank << '\t' << r.score << '\t' << r.doc_name << '\t' << r.start << '\t' << r.end
        << '\t' << node_type_name(r.type) << '\t' << r.name << '\t';
    for (std::size_t i = 0; i < r.matched_concepts.size(); ++i) {
      out << (i ? "," : "") << onto.id_of(r.matched_concepts[i]);
    }
    out << '\n';
  }
}

void eval_run(const std::string& config_path, const std::string& csv_path, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const Ontology onto = load_ontology_file(cfg.ontology_path);
  const ExperimentReport report = run_experiment(cfg, onto);
  std::ostringstream csv;
  write_report_csv(csv, report);
  write_file(csv_path, csv.str());
  write_report_table(out, report);
  out << "report written to " << csv_path << '\n';
}

void gen_corpus(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const Ontology onto = load_ontology_file(cfg.ontology_path);
  const GeneratedCorpus corpus = generate_corpus(onto, cfg.corpus, cfg.seed, cfg.query_count);

  const fs::path root(out_dir);
  std::error_code ec;
  fs::create_directories(root / "docs", ec);
  if (ec) throw Error(Errc::io, "cannot create '" + (root / "docs").string() + "': " + ec.message());
  for (const auto& d : corpus.documents) write_file(root / "docs" / (d.name + ".xml"), d.xml);

  std::ostringstream topics, queries, qrels;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    topics << corpus.documents[i].name << '\t' << corpus.topics[i] << '\n';
  }
  for (const auto& q : corpus.queries) queries << q.id << '\t' << q.concept_id << '\n';
  write_qrels(qrels, corpus.qrels);
  write_file(root / "topics.tsv", topics.str());
  write_file(root / "queries.tsv", queries.str());
  write_file(root / "qrels.txt", qrels.str());
  out << corpus.documents.size() << " documents, " << corpus.queries.size()
      << " queries written to " << out_dir << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Personalized XML retrieval over a weighted domain ontology", "xpir"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(service::kVersion));

  // ontology check
  auto* onto_cmd = app.add_subcommand("ontology", "Ontology tools")->require_subcommand(1);
  auto* check = onto_cmd->add_subcommand("check", "Validate an ontology and print its weights");
  std::string onto_file, scheme = "depth";
  check->add_option("file", onto_file, "Ontology JSON")->required();
  check->add_option("--scheme", scheme, "Concept weighting")->check(CLI::IsMember({"depth", "uniform"}));

  // index build
  auto* index_cmd = app.add_subcommand("index", "Index tools")->require_subcommand(1);
  auto* build = index_cmd->add_subcommand("build", "Index a directory of XML files");
  std::string corpus_dir, index_out, build_ontology, build_scheme = "depth";
  bool skip_errors = false, attribute_text = false;
  std::int64_t build_ts = 0;
  build->add_option("corpus", corpus_dir, "Directory of *.xml files")->required();
  build->add_option("out", index_out, "Index file to write")->required();
  build->add_option("--ontology", build_ontology, "Ontology JSON")->required();
  build->add_option("--scheme", build_scheme, "Concept weighting")->check(CLI::IsMember({"depth", "uniform"}));
  build->add_flag("--skip-errors", skip_errors, "Leave out documents that fail to parse");
  build->add_flag("--attribute-text", attribute_text, "Index attribute values as text");
  build->add_option("--timestamp", build_ts, "Build time recorded in the header");

  // search
  auto* search_cmd = app.add_subcommand("search", "Rank nodes for a query");
  SearchArgs sa;
  search_cmd->add_option("index", sa.index_path, "Index file")->required();
  search_cmd->add_option("--ontology", sa.ontology_path, "Ontology JSON")->required();
  search_cmd->add_option("--profiles", sa.profile_dir, "Profile directory");
  search_cmd->add_option("--user", sa.user, "User id");
  auto* text_opt = search_cmd->add_option("--query", sa.text, "Free-text query");
  auto* concept_opt = search_cmd->add_option("--concept", sa.concept_id, "Seed concept id");
  text_opt->excludes(concept_opt);
  search_cmd->add_option("-k", sa.k, "Results to return, 0 for all");
  search_cmd->add_flag("--no-profile", sa.no_profile, "Rank without the profile and leave it untouched");
  search_cmd->add_flag("--overlap-filter", sa.overlap, "Drop results nested in a better one");
  search_cmd->add_flag("--normalize-profile", sa.normalize, "Divide interests by their mean");
  search_cmd->add_option("--relations", sa.relations, "Relations followed from a seed concept");
  search_cmd->add_option("--hops", sa.hops, "Expansion depth from a seed concept");
  search_cmd->add_flag("--json", sa.as_json, "Print JSON");

  // profile show|create
  auto* profile_cmd = app.add_subcommand("profile", "User profiles")->require_subcommand(1);
  std::string profile_user, profile_dir, profile_onto;
  for (const char* name : {"show", "create"}) {
    auto* sub = profile_cmd->add_subcommand(name, std::string(name) == "show" ? "Print a profile"
                                                                                : "Create a uniform profile");
    sub->add_option("user", profile_user, "User id")->required();
    sub->add_option("--profiles", profile_dir, "Profile directory")->required();
    sub->add_option("--ontology", profile_onto, "Ontology JSON")->required();
  }

  // eval run
  auto* eval_cmd = app.add_subcommand("eval", "Evaluation harness")->require_subcommand(1);
  auto* eval_run_cmd = eval_cmd->add_subcommand("run", "Run the baseline/proposed experiment");
  std::string eval_config, csv_path = "report.csv";
  eval_run_cmd->add_option("config", eval_config, "Experiment config JSON")->required();
  eval_run_cmd->add_option("-o,--output", csv_path, "CSV report path");

  // gen corpus
  auto* gen_cmd = app.add_subcommand("gen", "Synthetic data")->require_subcommand(1);
  auto* gen_corpus_cmd = gen_cmd->add_subcommand("corpus", "Write the seeded corpus, queries and qrels");
  std::string gen_config, gen_out = "corpus";
  gen_corpus_cmd->add_option("config", gen_config, "Experiment config JSON")->required();
  gen_corpus_cmd->add_option("--out", gen_out, "Output directory");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  std::string serve_config;
  serve_cmd->add_option("config", serve_config, "Service config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (check->parsed()) {
      ontology_check(onto_file, scheme, out);
    } else if (build->parsed()) {
      const Ontology onto = load_with_scheme(build_ontology, build_scheme);
      IndexOptions opts;
      opts.on_error = skip_errors ? ErrorPolicy::skip : ErrorPolicy::abort;
      opts.attribute_text = attribute_text;
      opts.build_timestamp = build_ts;
      BuildReport report;
      const IndexStore index = build_index(read_corpus_dir(corpus_dir), onto, opts, &report);
      save_index(index, index_out);
      for (const auto& s : report.skipped) err << "skipped " << s << '\n';
      out << index.documents.size() << " documents, " << index.elements.size() << " elements, "
          << index.texts.size() << " text nodes indexed into " << index_out << '\n';
    } else if (search_cmd->parsed()) {
      if (sa.text.empty() && sa.concept_id.empty()) {
        err << "xpir: usage: search needs --query or --concept\n";
        return 1;
      }
      if (!sa.no_profile && (sa.user.empty() || sa.profile_dir.empty())) {
        err << "xpir: usage: search needs --user and --profiles unless --no-profile is given\n";
        return 1;
      }
      run_search(sa, out);
    } else if (profile_cmd->parsed()) {
      const Ontology onto = load_ontology_file(profile_onto);
      ProfileStore store(profile_dir);
      if (profile_cmd->got_subcommand("create")) {
        if (!ProfileStore::valid_user_id(profile_user)) {
          throw Error(Errc::invalid_argument, "invalid user id '" + profile_user + "'");
        }
        store.create(create_profile(profile_user, onto));
        out << "created " << profile_user << '\n';
      } else {
        if (!ProfileStore::valid_user_id(profile_user)) {
          throw Error(Errc::not_found, "unknown user '" + profile_user + "'");
        }
        out << profile_to_json(store.load(profile_user, onto), onto) << '\n';
      }
    } else if (eval_run_cmd->parsed()) {
      eval_run(eval_config, csv_path, out);
    } else if (gen_corpus_cmd->parsed()) {
      gen_corpus(gen_config, gen_out, out);
    } else if (serve_cmd->parsed()) {
      service::Service svc(service::load_service_config(serve_config));
      const auto& c = svc.config();
      out << "listening on " << c.host << ':' << c.port << std::endl;
      if (!service::serve(svc)) throw Error(Errc::io, "cannot listen on " + c.host + ':' + std::to_string(c.port));
    }
  } catch (const Error& e) {
    err << "xpir: " << errc_name(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "xpir: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace xpir::cli
