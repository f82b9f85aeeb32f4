#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "xpir/concept_vector.hpp"

namespace xpir {

// Coefficients and weights are exact until they are exported as doubles.
using Rational = boost::multiprecision::cpp_rational;

struct Relation {
  std::string name;
  std::string target;

  bool operator==(const Relation&) const = default;
};

struct Concept {
  std::string id;
  std::string label;
  std::vector<std::string> keywords;
  std::vector<std::string> parents;  // is-a edges
  std::vector<Relation> relations;

  bool operator==(const Concept&) const = default;
};

enum class WeightingScheme : std::uint8_t {
  depth = 1,    // coefficient rules + margin + real weights
  uniform = 2,  // W_R = 1/|N| for every concept
};

/// Validated, weighted domain ontology. Immutable after construction.
///
/// Concept indices follow the order of the source file; the fingerprint
/// covers that order, so dense per-concept arrays (profiles, stats) can be
/// bound to one ontology version.
class Ontology {
 public:
  struct Edge {
    ConceptIndex target;
    std::uint32_t relation;  // index into relation_names()
  };

  // Validates and weights. Throws Error{validation} naming the offending id.
  static Ontology build(std::string name, std::vector<Concept> concepts,
                        WeightingScheme scheme = WeightingScheme::depth);

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return concepts_.size(); }

  const Concept& at(ConceptIndex idx) const { return concepts_.at(idx); }
  std::optional<ConceptIndex> find(std::string_view id) const;
  // Throws Error{unknown_concept}.
  ConceptIndex index_of(std::string_view id) const;
  const std::string& id_of(ConceptIndex idx) const { return concepts_.at(idx).id; }

  std::span<const ConceptIndex> parents(ConceptIndex idx) const { return parents_.at(idx); }
  std::span<const ConceptIndex> children(ConceptIndex idx) const { return children_.at(idx); }
  std::span<const Edge> relations(ConceptIndex idx) const { return relations_.at(idx); }
  std::span<const std::string> relation_names() const noexcept { return relation_names_; }
  std::optional<std::uint32_t> find_relation(std::string_view name) const;

  std::span<const ConceptIndex> roots() const noexcept { return roots_; }
  // Longest is-a path from a root, roots at depth 1.
  std::uint32_t depth(ConceptIndex idx) const { return depth_.at(idx); }
  // Concepts ordered so that every parent precedes its children.
  std::span<const ConceptIndex> topological_order() const noexcept { return topo_; }

  bool is_strict_ancestor(ConceptIndex ancestor, ConceptIndex descendant) const;
  std::vector<ConceptIndex> descendants(ConceptIndex idx) const;

  WeightingScheme scheme() const noexcept { return scheme_; }
  std::span<const Rational> exact_coefficients() const noexcept { return coef_exact_; }
  double coefficient(ConceptIndex idx) const { return coef_.at(idx); }
  double weight(ConceptIndex idx) const { return weights_.at(idx); }
  std::span<const double> weights() const noexcept { return weights_; }

  // Undefined margin (degenerate ontology) is reported as nullopt.
  std::optional<double> margin() const noexcept { return margin_; }
  double avg_coefficient() const noexcept { return coef_avg_; }
  double avg_weight() const noexcept { return 1.0 / static_cast<double>(size()); }

  // 16 hex digits; covers concepts, their order and edges, not the scheme.
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  // Same concepts, W_R replaced by 1/|N|.
  Ontology with_scheme(WeightingScheme scheme) const;

  std::span<const Concept> concepts() const noexcept { return concepts_; }

 private:
  Ontology() = default;
  void compute_weights();

  std::string name_;
  std::vector<Concept> concepts_;
  std::unordered_map<std::string, ConceptIndex> by_id_;
  std::vector<std::vector<ConceptIndex>> parents_;
  std::vector<std::vector<ConceptIndex>> children_;
  std::vector<std::vector<Edge>> relations_;
  std::vector<std::string> relation_names_;
  std::vector<ConceptIndex> roots_;
  std::vector<ConceptIndex> topo_;
  std::vector<std::uint32_t> depth_;
  std::vector<std::vector<ConceptIndex>> ancestors_;  // sorted, strict

  WeightingScheme scheme_ = WeightingScheme::depth;
  std::vector<Rational> coef_exact_;
  std::vector<double> coef_;
  std::vector<double> weights_;
  std::optional<double> margin_;
  double coef_avg_ = 0.0;
  std::string fingerprint_;
};

// Reads the JSON ontology format. Throws Error{parse} for malformed input
// and Error{validation} for structural problems.
Ontology load_ontology(std::istream& source);
Ontology load_ontology_file(const std::string& path);
std::string ontology_to_json(const Ontology& ontology);

/// Depth coefficients, indexed like the ontology.
///
/// Roots get 1. Any other concept gets the mean of its parents'
/// coefficients plus one depth step, floored at the largest parent
/// coefficient plus one half so the value strictly exceeds every parent.
std::vector<Rational> assign_coefficients(const Ontology& ontology);

// total_weight / (sum_k (coef_k - root_coefficient))^2.
// Throws Error{degenerate_ontology} when the sum is zero.
Rational compute_margin(std::span<const Rational> coefficients,
                        const Rational& root_coefficient,
                        const Rational& total_weight = Rational(1));

// Throws Error{invalid_argument} for an empty span.
Rational compute_avg_coefficient(std::span<const Rational> coefficients);

/// W_R per concept: 1/|N| + margin * (coef - coef_avg). Falls back to
/// uniform weights for a degenerate ontology. Throws
/// Error{invalid_weighting} naming the first concept with W_R <= 0.
std::vector<Rational> compute_real_weights(std::span<const Rational> coefficients,
                                           std::span<const std::string> ids);

struct RelatedConcept {
  ConceptIndex concept_index;
  std::uint32_t hops;

  bool operator==(const RelatedConcept&) const = default;
};

// Breadth-first closure over is-a children plus the named relations.
// Sorted by (hops, concept id).
std::vector<RelatedConcept> related_concepts(const Ontology& ontology, ConceptIndex seed,
                                             std::span<const std::string> relation_names,
                                             std::uint32_t max_hops);

// Drops every concept that is a strict ancestor of another input concept.
// Output sorted by index, duplicates removed.
std::vector<ConceptIndex> most_specific(const Ontology& ontology,
                                        std::span<const ConceptIndex> concepts);

}  // namespace xpir
