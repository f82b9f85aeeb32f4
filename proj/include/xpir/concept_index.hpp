#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xpir/concept_vector.hpp"
#include "xpir/ontology.hpp"
#include "xpir/xmldoc.hpp"

namespace xpir {

/// Finds ontology keywords in free text.
///
/// Matching is case-insensitive over word tokens (runs of ASCII letters and
/// digits, plus any non-ASCII byte). At each position the longest keyword
/// wins and its words are consumed. When one span is a keyword of several
/// concepts, only the most specific of them are counted.
class ConceptMatcher {
 public:
  explicit ConceptMatcher(const Ontology& ontology);

  ConceptCounts extract(std::string_view text) const;

 private:
  struct Node {
    std::unordered_map<std::string, std::uint32_t> next;
    std::vector<ConceptIndex> concepts;  // already reduced to most specific
  };
  std::vector<Node> trie_;
};

std::vector<std::string> tokenize(std::string_view text);

// Convenience wrapper; builds a matcher per call.
ConceptCounts extract_concepts(std::string_view text, const Ontology& ontology);

struct CollectionStats {
  std::uint64_t total_text_nodes = 0;
  std::vector<std::uint32_t> text_nodes_containing;  // indexed by concept

  bool operator==(const CollectionStats&) const = default;
};

// Throws Error{invalid_argument} for an empty collection.
CollectionStats compute_stats(std::span<const ConceptCounts> text_counts,
                              std::size_t concept_count);

/// cf * ln(|N_t| / |N_t^c|) * W_R for every counted concept; zero weights
/// (a concept present in every text node) are dropped.
ConceptVector weight_text_node(const ConceptCounts& counts, const CollectionStats& stats,
                               std::span<const double> concept_weights);
ConceptVector weight_text_node(const ConceptCounts& counts, const CollectionStats& stats,
                               const Ontology& ontology);

struct TextEntry {
  DocId doc = 0;
  std::uint32_t start = 0;
  ConceptCounts counts;
  ConceptVector vector;

  bool operator==(const TextEntry&) const = default;
};

// Per-element descendant coverage: |N_t^e| and |N_t^{c,e}| per concept.
struct ElementCoverage {
  std::uint32_t text_nodes = 0;
  ConceptCounts containing;

  bool operator==(const ElementCoverage&) const = default;
};

struct ElementEntry {
  DocId doc = 0;
  std::uint32_t start = 0;
  ElementCoverage coverage;
  ConceptVector base;  // profile-independent part of the element vector

  bool operator==(const ElementEntry&) const = default;
};

// doc_texts: the indexed leaves of `tree`, sorted by start.
ElementCoverage compute_coverage(const NodeDescriptor& element, const DocumentTree& tree,
                                 std::span<const TextEntry> doc_texts);

/// Profile-independent element weights:
///   w'_ej = sum_k (|N_t^{c_j,e}| / |N_t^e|) * (1 / Dist(e, k)) * w_kj
/// over the indexed leaves k below `element`, in document order.
ConceptVector propagate_to_element(const NodeDescriptor& element, const DocumentTree& tree,
                                   std::span<const TextEntry> doc_texts,
                                   const ElementCoverage& coverage);

struct IndexHeader {
  std::string ontology_fingerprint;
  std::string log_base = "e";
  WeightingScheme weighting = WeightingScheme::depth;
  bool attribute_text = false;
  std::int64_t build_timestamp = 0;
  std::uint64_t total_text_nodes = 0;

  bool operator==(const IndexHeader&) const = default;
};

/// Built collection index. Documents get ids 1..N in input order; text and
/// element entries are sorted by (doc, start).
struct IndexStore {
  IndexHeader header;
  CollectionStats stats;
  std::vector<DocumentTree> documents;
  std::vector<TextEntry> texts;
  std::vector<ElementEntry> elements;

  const DocumentTree& document(DocId doc) const;
  const DocumentTree* find_document(std::string_view name) const;
  std::span<const TextEntry> texts_of(DocId doc) const;
  std::span<const ElementEntry> elements_of(DocId doc) const;

  bool operator==(const IndexStore&) const = default;
};

struct SourceDocument {
  std::string name;
  std::string xml;
};

enum class ErrorPolicy { abort, skip };

struct IndexOptions {
  ErrorPolicy on_error = ErrorPolicy::abort;
  // Treat attribute values as concept-bearing leaves.
  bool attribute_text = false;
  // Logical build time written to the header; keeps builds reproducible.
  std::int64_t build_timestamp = 0;
  std::ostream* progress = nullptr;
};

struct BuildReport {
  std::vector<std::string> skipped;  // "name: reason"
};

/// Two-phase build: parse and extract every document, compute collection
/// statistics, then weight text nodes and propagate to elements.
/// Parse errors carry the document name; with ErrorPolicy::skip the
/// document is left out and recorded in `report`.
IndexStore build_index(std::span<const SourceDocument> documents, const Ontology& ontology,
                       const IndexOptions& options = {}, BuildReport* report = nullptr);

// *.xml files of a directory, sorted by file name.
std::vector<SourceDocument> read_corpus_dir(const std::string& directory);

}  // namespace xpir
