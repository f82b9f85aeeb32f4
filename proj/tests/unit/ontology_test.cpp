#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/generators.hpp"
#include "xpir/error.hpp"
#include "xpir/ontology.hpp"

using namespace xpir;
using xpir::testing::data_path;

namespace {

Ontology from_json(const std::string& text) {
  std::istringstream in(text);
  return load_ontology(in);
}

Concept make(std::string id, std::vector<std::string> parents = {},
             std::vector<Relation> relations = {}) {
  Concept c;
  c.id = id;
  c.label = id;
  c.keywords = {id};
  c.parents = std::move(parents);
  c.relations = std::move(relations);
  return c;
}

Errc error_code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an xpir::Error");
  return Errc::internal_consistency;
}

}  // namespace

TEST_SUITE("ontology") {

TEST_CASE("seven-class fixture reproduces the worked weighting example") {
  const Ontology o = load_ontology_file(data_path("ontologies/generic7.json"));
  REQUIRE(o.size() == 7);

  const std::vector<std::string> order = {"domain", "path",    "field",  "element",
                                          "script", "concept", "granule"};
  const std::vector<Rational> expected = {1, 2, Rational(5, 2), 3, 4, Rational(9, 2), 5};
  const auto coef = assign_coefficients(o);
  for (std::size_t k = 0; k < order.size(); ++k) {
    CHECK(coef[o.index_of(order[k])] == expected[k]);
  }

  CHECK(compute_margin(coef, Rational(1)) == Rational(1, 225));
  CHECK(compute_avg_coefficient(coef) == Rational(22, 7));
  CHECK(o.margin().value() == doctest::Approx(0.004444).epsilon(1e-4));
  CHECK(std::abs(*o.margin() - 0.0044444444) < 1e-6);
  CHECK(std::abs(o.avg_coefficient() - 3.142857) < 1e-6);
  CHECK(std::abs(o.avg_weight() - 0.142857) < 1e-6);

  // Frozen from exact evaluation of W_AVG + margin * (coef - coef_avg).
  CHECK(o.weight(o.index_of("granule")) == doctest::Approx(34.0 / 225.0).epsilon(1e-12));
  CHECK(o.weight(o.index_of("domain")) == doctest::Approx(2.0 / 15.0).epsilon(1e-12));

  double sum = 0.0;
  for (double w : o.weights()) sum += w;
  CHECK(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("single concept gets the whole ontology weight") {
  const Ontology o = Ontology::build("one", {make("only")});
  CHECK(o.weight(0) == 1.0);
  CHECK_FALSE(o.margin().has_value());
  CHECK(assign_coefficients(o) == std::vector<Rational>{1});
  CHECK(compute_avg_coefficient(assign_coefficients(o)) == 1);
  CHECK(error_code_of([&] { compute_margin(assign_coefficients(o), Rational(1)); }) ==
        Errc::degenerate_ontology);
}

TEST_CASE("chains follow the depth rule") {
  const Ontology four = Ontology::build("chain", {make("A"), make("B", {"A"}), make("C", {"B"}),
                                                  make("D", {"C"})});
  CHECK(assign_coefficients(four) == std::vector<Rational>{1, 2, 3, 4});

  const std::vector<Rational> three = {1, 2, 3};
  CHECK(compute_margin(three, Rational(1)) == Rational(1, 9));
  CHECK(compute_avg_coefficient(three) == 2);
}

TEST_CASE("forest of roots only falls back to uniform weights") {
  const Ontology o = Ontology::build("flat", {make("a"), make("b"), make("c")});
  for (double w : o.weights()) CHECK(w == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("non-positive real weight is reported with the concept id") {
  // Coefficients (1, 2): spread 1, root weight 1/2 + 1 * (1 - 3/2) = 0.
  try {
    Ontology::build("pair", {make("root"), make("leaf", {"root"})});
    FAIL("expected invalid weighting");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_weighting);
    CHECK(std::string(e.what()).find("root") != std::string::npos);
  }
  // Uniform scheme never divides by the spread.
  const Ontology u = Ontology::build("pair", {make("root"), make("leaf", {"root"})},
                                     WeightingScheme::uniform);
  CHECK(u.weight(0) == 0.5);
}

TEST_CASE("validation errors name the offending concept") {
  auto message_of = [](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const Error& e) {
      CHECK(e.code() == Errc::validation);
      return e.what();
    }
    return "";
  };
  CHECK(message_of([] { Ontology::build("x", {make("a"), make("b", {"ghost"})}); })
            .find("ghost") != std::string::npos);
  CHECK(message_of([] { Ontology::build("x", {make("a"), make("a")}); }).find("'a'") !=
        std::string::npos);
  CHECK(message_of([] {
          Ontology::build("x", {make("r"), make("a", {"b"}), make("b", {"a"})});
        }).find("cycle") != std::string::npos);
  Concept blank = make("blank");
  blank.keywords = {"   "};
  CHECK(message_of([&] { Ontology::build("x", {blank}); }).find("blank") != std::string::npos);
  Concept none = make("none");
  none.keywords.clear();
  CHECK(message_of([&] { Ontology::build("x", {none}); }).find("none") != std::string::npos);
}

TEST_CASE("loader rejects malformed files and unknown fields") {
  CHECK(error_code_of([] { from_json("{\"name\": \"x\", \"concepts\": [}"); }) == Errc::parse);
  CHECK(error_code_of([] {
          from_json(R"({"name":"x","concepts":[{"id":"a","keywords":["a"],"colour":"red"}]})");
        }) == Errc::parse);
  CHECK(error_code_of([] { from_json(R"({"name":"x","concepts":[],"extra":1})"); }) ==
        Errc::parse);
  CHECK(error_code_of([] {
          from_json(R"({"name":"x","concepts":[{"id":"a","keywords":["a"],"parents":["zz"]}]})");
        }) == Errc::validation);
}

TEST_CASE("loading is deterministic and round-trips through JSON") {
  const Ontology a = load_ontology_file(data_path("ontologies/generic7.json"));
  const Ontology b = from_json(ontology_to_json(a));
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(std::vector<double>(a.weights().begin(), a.weights().end()) ==
        std::vector<double>(b.weights().begin(), b.weights().end()));
}

TEST_CASE("fingerprint tracks concept content") {
  const Ontology a = Ontology::build("x", {make("a"), make("b", {"a"}), make("c", {"b"})});
  auto concepts = std::vector<Concept>(a.concepts().begin(), a.concepts().end());
  concepts[2].keywords.push_back("extra");
  const Ontology b = Ontology::build("x", concepts);
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(a.fingerprint().size() == 16);
}

TEST_CASE("related_concepts closure") {
  const Ontology o = load_ontology_file(data_path("ontologies/generic7.json"));
  const ConceptIndex domain = o.index_of("domain");

  auto hop0 = related_concepts(o, domain, {}, 0);
  REQUIRE(hop0.size() == 1);
  CHECK(hop0[0] == RelatedConcept{domain, 0});

  // Oracle: adjacency list of the fixture. Children of domain: path, field.
  auto hop1 = related_concepts(o, domain, {}, 1);
  REQUIRE(hop1.size() == 3);
  CHECK(hop1[0].concept_index == domain);
  CHECK(o.id_of(hop1[1].concept_index) == "field");
  CHECK(o.id_of(hop1[2].concept_index) == "path");
  CHECK(hop1[1].hops == 1);

  // granule is a leaf whose only outgoing edge is... none; script has trait -> granule
  // and an is-a child granule as well, so use a dedicated fixture for one edge.
  const Ontology m = Ontology::build(
      "m", {make("car", {}, {{"made-of", "wheel"}}), make("wheel"), make("engine")});
  const std::vector<std::string> made_of = {"made-of"};
  auto one = related_concepts(m, m.index_of("car"), made_of, 1);
  REQUIRE(one.size() == 2);
  CHECK(one[0] == RelatedConcept{m.index_of("car"), 0});
  CHECK(one[1] == RelatedConcept{m.index_of("wheel"), 1});
  // Without naming the relation it is not followed.
  CHECK(related_concepts(m, m.index_of("car"), {}, 3).size() == 1);

  const std::vector<std::string> bogus = {"part-of"};
  CHECK(error_code_of([&] { related_concepts(m, 0, bogus, 1); }) == Errc::unknown_relation);
  CHECK(error_code_of([&] { related_concepts(m, 99, {}, 1); }) == Errc::unknown_concept);
  CHECK(error_code_of([&] { (void)m.index_of("nope"); }) == Errc::unknown_concept);
}

TEST_CASE("related_concepts reports shortest hop distances") {
  const Ontology o = load_ontology_file(data_path("ontologies/generic7.json"));
  const std::vector<std::string> rels = {"made-of", "trait"};
  auto all = related_concepts(o, o.index_of("domain"), rels, 10);
  CHECK(all.size() == 7);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].hops <= all[i].hops);
  auto hops_of = [&](const std::string& id) {
    for (const auto& r : all) {
      if (o.id_of(r.concept_index) == id) return r.hops;
    }
    return 999u;
  };
  CHECK(hops_of("element") == 2);
  CHECK(hops_of("granule") == 4);
}

TEST_CASE("most_specific keeps only the deepest of each ancestor chain") {
  const Ontology o = load_ontology_file(data_path("ontologies/generic7.json"));
  const auto id = [&](const char* s) { return o.index_of(s); };

  std::vector<ConceptIndex> pair = {id("path"), id("element")};
  CHECK(most_specific(o, pair) == std::vector<ConceptIndex>{id("element")});
  std::vector<ConceptIndex> single = {id("field")};
  CHECK(most_specific(o, single) == single);
  std::vector<ConceptIndex> unrelated = {id("field"), id("element")};
  CHECK(most_specific(o, unrelated).size() == 2);
  std::vector<ConceptIndex> bad = {42};
  CHECK(error_code_of([&] { most_specific(o, bad); }) == Errc::unknown_concept);
}

TEST_CASE("most_specific is idempotent with no ancestor pairs (random)") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 50; ++round) {
    const Ontology o = Ontology::build("r", testing::random_concepts(rng, 60));
    std::uniform_int_distribution<ConceptIndex> pick(0, static_cast<ConceptIndex>(o.size() - 1));
    std::vector<ConceptIndex> input(8);
    for (auto& c : input) c = pick(rng);
    const auto once = most_specific(o, input);
    CHECK(most_specific(o, once) == once);
    for (ConceptIndex a : once) {
      for (ConceptIndex b : once) CHECK_FALSE(o.is_strict_ancestor(a, b));
    }
  }
}

TEST_CASE("random ontologies: weights sum to one and grow along is-a edges") {
  std::mt19937_64 rng(2024);
  for (int round = 0; round < 100; ++round) {
    const Ontology o = Ontology::build("r", testing::random_concepts(rng));
    long double sum = 0;
    for (double w : o.weights()) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(std::abs(static_cast<double>(sum) - 1.0) < 1e-9);
    for (ConceptIndex c = 0; c < o.size(); ++c) {
      for (ConceptIndex p : o.parents(c)) {
        CHECK(o.depth(c) > o.depth(p));
        CHECK(o.coefficient(c) > o.coefficient(p));
        CHECK(o.weight(c) >= o.weight(p));
      }
    }
  }
}

}  // TEST_SUITE
