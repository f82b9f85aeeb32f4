#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/generators.hpp"
#include "../support/table3.hpp"
#include "xpir/error.hpp"
#include "xpir/evalkit.hpp"

using namespace xpir;
using xpir::testing::data_path;

namespace {

const Ontology& cs() {
  static const Ontology o = load_ontology_file(data_path("ontologies/computer_science.json"));
  return o;
}

const ExperimentConfig& default_config() {
  static const ExperimentConfig c = load_experiment_config(data_path("eval/default.json"));
  return c;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::internal_consistency;
}

RankedResult result(std::string doc, std::uint32_t start, double score) {
  RankedResult r;
  r.doc_name = std::move(doc);
  r.start = start;
  r.score = score;
  return r;
}

using Relevant = std::set<std::pair<std::string, std::uint32_t>>;

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("F1 reproduces every published cell") {
  for (const auto& c : xpir::testing::kTable3) {
    CHECK(std::abs(f1_score(c.precision, c.recall) - c.f1) <= 5e-4);
  }
  CHECK(f1_score(0.80, 1.00) == doctest::Approx(0.8889).epsilon(1e-4));
  CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("precision, recall and F1 examples") {
  const Relevant rel = {{"a", 0}, {"b", 0}};
  const std::vector<RankedResult> exact = {result("a", 1, 0.9), result("b", 4, 0.5),
                                           result("a", 7, 0.2)};
  const auto m = precision_recall_f1(exact, rel, Granularity::document, Cutoff{});
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);

  Relevant twenty;
  std::vector<RankedResult> returned;
  for (int i = 0; i < 25; ++i) {
    const std::string name = "d" + std::to_string(i);
    if (i < 20) twenty.emplace(name, 0);
    returned.push_back(result(name, 1, 1.0 - i * 0.01));
  }
  const auto t2 = precision_recall_f1(returned, twenty, Granularity::document, Cutoff{});
  CHECK(t2.precision == doctest::Approx(0.80));
  CHECK(t2.recall == 1.0);
  CHECK(t2.retrieved == 25);

  Cutoff top;
  top.mode = CutoffMode::top_k;
  top.k = 10;
  const auto t10 = precision_recall_f1(returned, twenty, Granularity::document, top);
  CHECK(t10.precision == 1.0);
  CHECK(t10.recall == doctest::Approx(0.5));

  Cutoff rel_cut;
  rel_cut.mode = CutoffMode::relative;
  rel_cut.fraction = 0.9;
  // Scores 1.00 .. 0.90 pass: eleven documents.
  CHECK(precision_recall_f1(returned, twenty, Granularity::document, rel_cut).retrieved == 11);

  const Relevant nodes = {{"a", 4}};
  const std::vector<RankedResult> node_run = {result("a", 1, 0.9), result("a", 4, 0.5)};
  const auto n = precision_recall_f1(node_run, nodes, Granularity::node, Cutoff{});
  CHECK(n.precision == 0.5);
  CHECK(n.recall == 1.0);

  CHECK(precision_recall_f1({}, rel, Granularity::document, Cutoff{}).f1 == 0.0);
  CHECK(code_of([&] { precision_recall_f1(exact, {}, Granularity::document, Cutoff{}); }) ==
        Errc::invalid_argument);
  top.k = 0;
  CHECK(code_of([&] { precision_recall_f1(exact, rel, Granularity::document, top); }) ==
        Errc::invalid_argument);
}

TEST_CASE("metric identities on random runs") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> doc(0, 14);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (int round = 0; round < 300; ++round) {
    Relevant rel;
    for (int i = 0; i < 1 + round % 6; ++i) rel.emplace("d" + std::to_string(doc(rng)), 0);
    std::vector<RankedResult> run;
    for (int i = 0; i < round % 12; ++i) run.push_back(result("d" + std::to_string(doc(rng)), 1, score(rng)));
    std::sort(run.begin(), run.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    const auto m = precision_recall_f1(run, rel, Granularity::document, Cutoff{});
    CHECK(m.precision >= 0.0);
    CHECK(m.precision <= 1.0);
    CHECK(m.recall >= 0.0);
    CHECK(m.recall <= 1.0);
    CHECK(m.f1 <= std::min(2 * m.precision, 2 * m.recall) + 1e-12);
    CHECK((m.f1 == 0.0) == (m.precision * m.recall == 0.0));
  }
}

TEST_CASE("generated corpus shape and determinism") {
  const auto& cfg = default_config();
  const auto a = generate_corpus(cs(), cfg.corpus, cfg.seed, cfg.query_count);
  const auto b = generate_corpus(cs(), cfg.corpus, cfg.seed, cfg.query_count);
  REQUIRE(a.documents.size() == 40);
  for (std::size_t i = 0; i < a.documents.size(); ++i) {
    CHECK(a.documents[i].name == b.documents[i].name);
    CHECK(a.documents[i].xml == b.documents[i].xml);
  }
  CHECK(a.queries == b.queries);
  CHECK(a.qrels == b.qrels);
  CHECK(a.queries.size() >= 20);

  const IndexStore index = build_index(a.documents, cs());
  CHECK(std::abs(static_cast<double>(index.elements.size()) - 645.0) <= 0.2 * 645.0);
  CHECK(std::abs(static_cast<double>(index.texts.size()) - 580.0) <= 0.2 * 580.0);

  // Every query has judgments, and they point at generated documents.
  std::set<std::string> names;
  for (const auto& d : a.documents) names.insert(d.name);
  for (const auto& q : a.queries) {
    const auto& rel = a.qrels.relevant.at(q.id);
    CHECK(!rel.empty());
    for (const auto& [doc, start] : rel) CHECK(names.count(doc) == 1);
  }

  // Some paragraph mixes a general concept with one of its descendants.
  bool mixed = false;
  for (const auto& t : index.texts) {
    std::vector<ConceptIndex> found;
    for (const auto& [c, n] : t.counts) found.push_back(c);
    if (most_specific(cs(), found).size() < found.size()) mixed = true;
  }
  CHECK(mixed);

  const auto other = generate_corpus(cs(), cfg.corpus, cfg.seed + 1, cfg.query_count);
  CHECK(other.documents[0].xml != a.documents[0].xml);
}

TEST_CASE("filler text carries no concepts") {
  for (const char* s : {"The discussion stays informal here.", "Readers may skip the details on a first pass.",
                        "Results are summarized at the end.", "Exercises appear after the main text.",
                        "Figures are omitted from this version.", "in practice",
                        "This part explains with a short example.", "Practical notes on follow.",
                        "The design relies on at several points.", "We compare several views of.",
                        "A worked example shows how behaves.", "Common pitfalls around are listed below."}) {
    CHECK_MESSAGE(extract_concepts(s, cs()).empty(), s);
  }
}

TEST_CASE("generator configuration errors") {
  CorpusConfig cfg = default_config().corpus;
  cfg.documents = 0;
  CHECK(code_of([&] { generate_corpus(cs(), cfg, 1, 5); }) == Errc::config);
  cfg = default_config().corpus;
  cfg.domains = {{"databases", 1.0}};
  CHECK(code_of([&] { generate_corpus(cs(), cfg, 1, 5); }) == Errc::config);
  cfg.domains = {{"databases", 1.0}, {"nope", 1.0}};
  CHECK(code_of([&] { generate_corpus(cs(), cfg, 1, 5); }) == Errc::config);
  cfg.domains = {{"databases", 1.0}, {"relational_model", 1.0}};
  CHECK(code_of([&] { generate_corpus(cs(), cfg, 1, 5); }) == Errc::config);

  const auto one = Ontology::build("one", {Concept{"only", "Only", {"only"}, {}, {}}});
  CorpusConfig single = default_config().corpus;
  single.domains = {{"only", 1.0}};
  CHECK(code_of([&] { generate_corpus(one, single, 1, 1); }) == Errc::config);

  cfg = default_config().corpus;
  CHECK(code_of([&] { generate_corpus(cs(), cfg, 1, 500); }) == Errc::config);
}

TEST_CASE("qrels lines round trip") {
  Qrels q;
  q.relevant["q01"] = {{"doc001", 0}, {"doc007", 0}};
  q.relevant["q02"] = {{"doc003", 0}};
  std::stringstream s;
  write_qrels(s, q);
  CHECK(s.str() == "q01 doc001 0 1\nq01 doc007 0 1\nq02 doc003 0 1\n");
  CHECK(read_qrels(s, Granularity::document) == q);
  std::istringstream bad("q01 doc001 x 1\n");
  CHECK(code_of([&] { read_qrels(bad, Granularity::document); }) == Errc::parse);
  std::istringstream zero("# comment\nq01 doc001 0 0\n");
  CHECK(read_qrels(zero, Granularity::document).relevant.empty());
}

TEST_CASE("experiment rows, averages and report bytes") {
  const auto report = run_experiment(default_config(), cs());
  std::size_t same_user = 0;
  for (const auto& r : report.rows) {
    for (const Metrics* m : {&r.metrics, &r.positive}) {
      CHECK(m->precision >= 0.0);
      CHECK(m->precision <= 1.0);
      CHECK(m->recall >= 0.0);
      CHECK(m->recall <= 1.0);
      CHECK(m->f1 >= 0.0);
      CHECK(m->f1 <= 1.0);
    }
    same_user += r.experiment == "same_user";
  }
  CHECK(same_user == 2 * default_config().query_count);
  CHECK(report.rows.size() - same_user ==
        2 * default_config().users.size() * default_config().instants.size());

  for (const char* exp : {"same_user", "instants"}) {
    for (auto c : {Configuration::baseline, Configuration::proposed}) {
      double p = 0, r = 0, f = 0;
      std::size_t n = 0;
      for (const auto& row : report.rows) {
        if (row.experiment != exp || row.configuration != c) continue;
        p += row.metrics.precision;
        r += row.metrics.recall;
        f += row.metrics.f1;
        ++n;
      }
      const auto m = report.mean(exp, c);
      REQUIRE(m.rows == n);
      CHECK(std::abs(m.precision - p / n) <= 1e-12);
      CHECK(std::abs(m.recall - r / n) <= 1e-12);
      CHECK(std::abs(m.f1 - f / n) <= 1e-12);
    }
  }

  // With every positive score retrieved, the two configurations coincide.
  const auto pb = report.mean("same_user", Configuration::baseline, true);
  const auto pp = report.mean("same_user", Configuration::proposed, true);
  CHECK(pb.precision == pp.precision);
  CHECK(pb.recall == pp.recall);

  std::ostringstream csv1, csv2, tab1, tab2;
  write_report_csv(csv1, report);
  write_report_table(tab1, report);
  const auto again = run_experiment(default_config(), cs());
  write_report_csv(csv2, again);
  write_report_table(tab2, again);
  CHECK(csv1.str() == csv2.str());
  CHECK(tab1.str() == tab2.str());
  CHECK(tab1.str().find("P=0.426") != std::string::npos);
}

TEST_CASE("experiment config parsing") {
  const auto& c = default_config();
  CHECK(c.cutoff.mode == CutoffMode::relative);
  CHECK(c.users.size() == 4);
  CHECK(c.instants.size() == 8);
  const std::string minimal = R"({"seed": 3, "ontology": "o.json", "corpus": {"domains": {"a": 1, "b": 1}},
    "users": [{"id": "u"}], "same_user": "u"})";
  const auto m = parse_experiment_config(minimal, "/base");
  CHECK(m.ontology_path == "/base/o.json");
  CHECK(m.cutoff.mode == CutoffMode::positive);
  CHECK(code_of([] { parse_experiment_config("{", "."); }) == Errc::parse);
  CHECK(code_of([&] {
          parse_experiment_config(minimal.substr(0, minimal.size() - 1) + R"(, "extra": 1})", ".");
        }) == Errc::config);
  CHECK(code_of([] {
          parse_experiment_config(R"({"seed": 3, "ontology": "o", "corpus": {"domains": {}},
            "users": [{"id": "u"}], "same_user": "v"})", ".");
        }) == Errc::config);
  CHECK(code_of([] { load_experiment_config("/nonexistent.json"); }) == Errc::io);
}

}  // TEST_SUITE
