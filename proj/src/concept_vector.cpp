#include "xpir/concept_vector.hpp"

#include <algorithm>
#include <cmath>

namespace xpir {

namespace {

bool by_index(const ConceptVector::Entry& a, const ConceptVector::Entry& b) {
  return a.first < b.first;
}

}  // namespace

ConceptVector ConceptVector::from_entries(std::vector<Entry> entries) {
  std::stable_sort(entries.begin(), entries.end(), by_index);
  ConceptVector out;
  out.entries_.reserve(entries.size());
  for (const auto& [idx, w] : entries) {
    if (!out.entries_.empty() && out.entries_.back().first == idx) {
      out.entries_.back().second += w;
    } else {
      out.entries_.emplace_back(idx, w);
    }
  }
  std::erase_if(out.entries_, [](const Entry& e) { return e.second == 0.0; });
  return out;
}

double ConceptVector::get(ConceptIndex concept_index) const noexcept {
  auto it = std::lower_bound(entries_.begin(), entries_.end(),
                             Entry{concept_index, 0.0}, by_index);
  return (it != entries_.end() && it->first == concept_index) ? it->second : 0.0;
}

void ConceptVector::set(ConceptIndex concept_index, double weight) {
  auto it = std::lower_bound(entries_.begin(), entries_.end(),
                             Entry{concept_index, 0.0}, by_index);
  const bool present = it != entries_.end() && it->first == concept_index;
  if (weight == 0.0) {
    if (present) entries_.erase(it);
  } else if (present) {
    it->second = weight;
  } else {
    entries_.insert(it, Entry{concept_index, weight});
  }
}

void ConceptVector::add(ConceptIndex concept_index, double delta) {
  set(concept_index, get(concept_index) + delta);
}

double ConceptVector::dot(const ConceptVector& other) const noexcept {
  double sum = 0.0;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      sum += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return sum;
}

double ConceptVector::norm() const noexcept {
  double sum = 0.0;
  for (const auto& e : entries_) sum += e.second * e.second;
  return std::sqrt(sum);
}

}  // namespace xpir
