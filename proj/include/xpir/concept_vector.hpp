#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace xpir {

// Position of a concept in its ontology. Stable for a given ontology
// fingerprint; never persisted without that fingerprint alongside.
using ConceptIndex = std::uint32_t;

/// Sparse concept -> weight map, kept sorted by concept index.
///
/// Shared representation for text-node vectors, element vectors, query
/// vectors and profile deltas. Zero weights are never stored.
class ConceptVector {
 public:
  using Entry = std::pair<ConceptIndex, double>;

  ConceptVector() = default;

  // Entries may be unsorted and contain duplicates; duplicates are summed.
  static ConceptVector from_entries(std::vector<Entry> entries);

  double get(ConceptIndex concept_index) const noexcept;
  void set(ConceptIndex concept_index, double weight);
  void add(ConceptIndex concept_index, double delta);

  std::span<const Entry> entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  double dot(const ConceptVector& other) const noexcept;
  double norm() const noexcept;

  bool operator==(const ConceptVector&) const = default;

 private:
  std::vector<Entry> entries_;
};

/// Per-concept occurrence counts (cf) for one text node, sorted by index.
using ConceptCounts = std::vector<std::pair<ConceptIndex, std::uint32_t>>;

}  // namespace xpir
