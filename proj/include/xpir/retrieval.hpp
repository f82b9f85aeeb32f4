#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xpir/concept_index.hpp"
#include "xpir/profile.hpp"

namespace xpir {

struct Expansion {
  std::vector<std::string> relations;
  std::uint32_t max_hops = 0;
};

/// Either free text or a seed concept id.
struct Query {
  std::string raw_text;
  std::optional<std::string> seed_concept;
  Expansion expansion;
};

/// Raw text: matched concepts, reduced to the most specific, weight 1.
/// Seed: the seed plus its related-concept closure, weight 1 / (1 + hops).
/// Throws Error{empty_query} when nothing is recognized.
ConceptVector build_query_vector(const Query& query, const Ontology& ontology);

// 0 when either vector is empty.
double cosine_score(const ConceptVector& q, const ConceptVector& v);

/// Multiplies each entry by the user's interest weight. With `normalize`,
/// the factors are divided by the mean interest weight first.
ConceptVector personalize(const ConceptVector& base, const UserProfile& profile,
                          bool normalize = false);

/// e^{N_P / (N_P - 1)} / e^{N_NP}; the exponent is taken as 2 at N_P = 1,
/// and the factor is 0 at N_P = 0.
double pertinence_factor(std::int64_t supporting, std::int64_t non_supporting);
double element_pertinence(const ConceptVector& q, const ConceptVector& personalized,
                          std::int64_t supporting, std::int64_t non_supporting);

inline constexpr double kScoreFloor = 1e-12;

struct SearchOptions {
  std::size_t k = 10;  // 0 = unlimited
  bool overlap_filter = false;
  bool use_profile = true;
  bool normalize_profile = false;
};

struct RankedResult {
  DocId doc = 0;
  std::string doc_name;
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  NodeType type = NodeType::element;
  std::string name;  // element or attribute name, empty for text
  double score = 0.0;
  std::vector<ConceptIndex> matched_concepts;

  bool operator==(const RankedResult&) const = default;
};

/// Read-only ranking over one index. Safe to share between threads.
class SearchEngine {
 public:
  // Throws Error{stale_index} when the index was built for another ontology.
  SearchEngine(const IndexStore& index, const Ontology& ontology);

  const IndexStore& index() const noexcept { return *index_; }
  const Ontology& ontology() const noexcept { return *ontology_; }

  /// Text and attribute leaves are scored by cosine, elements by pertinence
  /// against the personalized element vector. Scores below kScoreFloor are
  /// dropped. Sorted by score, then (doc, start). `profile` may be null or
  /// ignored via options.use_profile, which leaves element vectors as built.
  std::vector<RankedResult> rank(const ConceptVector& q, const UserProfile* profile,
                                 const SearchOptions& options) const;

 private:
  const IndexStore* index_;
  const Ontology* ontology_;
};

/// Answers against the current profile, then records the query vector in it.
std::vector<RankedResult> search(const SearchEngine& engine, const Query& query,
                                 UserProfile& profile, std::int64_t timestamp,
                                 const SearchOptions& options);

}  // namespace xpir
