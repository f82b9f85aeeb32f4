#include "xpir/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xpir/error.hpp"

namespace xpir {

ConceptVector build_query_vector(const Query& query, const Ontology& ontology) {
  std::vector<ConceptVector::Entry> entries;
  if (query.seed_concept) {
    const ConceptIndex seed = ontology.index_of(*query.seed_concept);
    for (const auto& r : related_concepts(ontology, seed, query.expansion.relations,
                                          query.expansion.max_hops)) {
      entries.emplace_back(r.concept_index, 1.0 / (1.0 + r.hops));
    }
  } else {
    const auto counts = extract_concepts(query.raw_text, ontology);
    std::vector<ConceptIndex> found;
    for (const auto& [c, n] : counts) found.push_back(c);
    for (ConceptIndex c : most_specific(ontology, found)) entries.emplace_back(c, 1.0);
  }
  if (entries.empty()) {
    throw Error(Errc::empty_query, "no ontology concept recognized in the query");
  }
  return ConceptVector::from_entries(std::move(entries));
}

double cosine_score(const ConceptVector& q, const ConceptVector& v) {
  const double nq = q.norm();
  const double nv = v.norm();
  if (nq == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(q.dot(v) / (nq * nv), 0.0, 1.0);
}

ConceptVector personalize(const ConceptVector& base, const UserProfile& profile, bool normalize) {
  double scale = 1.0;
  if (normalize && !profile.interests.empty()) {
    const double mean =
        std::accumulate(profile.interests.begin(), profile.interests.end(), 0.0) /
        static_cast<double>(profile.interests.size());
    scale = 1.0 / mean;
  }
  std::vector<ConceptVector::Entry> out;
  out.reserve(base.size());
  for (const auto& [c, w] : base.entries()) {
    out.emplace_back(c, w * interest_weight(profile, c) * scale);
  }
  return ConceptVector::from_entries(std::move(out));
}

double pertinence_factor(std::int64_t supporting, std::int64_t non_supporting) {
  if (supporting < 0 || non_supporting < 0) {
    throw Error(Errc::invalid_argument, "text node counts must be non-negative");
  }
  if (supporting == 0) return 0.0;
  const double np = static_cast<double>(supporting);
  const double exponent = supporting == 1 ? 2.0 : np / (np - 1.0);
  return std::exp(exponent - static_cast<double>(non_supporting));
}

double element_pertinence(const ConceptVector& q, const ConceptVector& personalized,
                          std::int64_t supporting, std::int64_t non_supporting) {
  const double f = pertinence_factor(supporting, non_supporting);
  if (f == 0.0) return 0.0;
  return f * cosine_score(q, personalized);
}

SearchEngine::SearchEngine(const IndexStore& index, const Ontology& ontology)
    : index_(&index), ontology_(&ontology) {
  if (index.header.ontology_fingerprint != ontology.fingerprint()) {
    throw Error(Errc::stale_index, "index was built for ontology " +
                                       index.header.ontology_fingerprint + ", loaded ontology is " +
                                       ontology.fingerprint());
  }
}

namespace {

std::vector<ConceptIndex> matched(const ConceptVector& q, const ConceptVector& v) {
  std::vector<ConceptIndex> out;
  for (const auto& [c, w] : q.entries()) {
    if (v.get(c) != 0.0) out.push_back(c);
  }
  return out;
}

bool better(const RankedResult& a, const RankedResult& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.doc != b.doc) return a.doc < b.doc;
  return a.start < b.start;
}

}  // namespace

std::vector<RankedResult> SearchEngine::rank(const ConceptVector& q, const UserProfile* profile,
                                             const SearchOptions& options) const {
  const bool personal = options.use_profile && profile != nullptr;
  if (personal) check_fingerprint(*profile, *ontology_);

  std::vector<RankedResult> results;
  std::vector<std::uint32_t> supporting_prefix;
  for (const auto& tree : index_->documents) {
    const auto texts = index_->texts_of(tree.doc());
    supporting_prefix.assign(texts.size() + 1, 0);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const double s = cosine_score(q, texts[i].vector);
      const bool support = s >= kScoreFloor;
      supporting_prefix[i + 1] = supporting_prefix[i] + (support ? 1 : 0);
      if (!support) continue;
      const NodeDescriptor* node = tree.find(texts[i].start);
      if (node == nullptr) throw Error(Errc::internal_consistency, "text entry without descriptor");
      results.push_back({tree.doc(), tree.name(), node->start, node->end, node->type, node->name, s,
                         matched(q, texts[i].vector)});
    }

    for (const auto& e : index_->elements_of(tree.doc())) {
      if (e.base.empty()) continue;
      const NodeDescriptor* node = tree.find(e.start);
      if (node == nullptr) {
        throw Error(Errc::internal_consistency, "element entry without descriptor");
      }
      auto first = std::upper_bound(texts.begin(), texts.end(), node->start,
                                    [](std::uint32_t s, const TextEntry& t) { return s < t.start; });
      auto last = std::lower_bound(first, texts.end(), node->end,
                                   [](const TextEntry& t, std::uint32_t s) { return t.start < s; });
      const auto lo = static_cast<std::size_t>(first - texts.begin());
      const auto hi = static_cast<std::size_t>(last - texts.begin());
      const std::int64_t np = supporting_prefix[hi] - supporting_prefix[lo];
      if (np == 0) continue;
      const std::int64_t nnp = static_cast<std::int64_t>(hi - lo) - np;
      const ConceptVector v =
          personal ? personalize(e.base, *profile, options.normalize_profile) : e.base;
      const double s = element_pertinence(q, v, np, nnp);
      if (s < kScoreFloor) continue;
      results.push_back({tree.doc(), tree.name(), node->start, node->end, node->type, node->name, s,
                         matched(q, v)});
    }
  }
  std::sort(results.begin(), results.end(), better);

  if (options.overlap_filter) {
    std::vector<RankedResult> kept;
    for (auto& r : results) {
      const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const RankedResult& k) {
        return k.doc == r.doc && ((k.start < r.start && r.end < k.end) ||
                                  (r.start < k.start && k.end < r.end));
      });
      if (!overlaps) kept.push_back(std::move(r));
      if (options.k != 0 && kept.size() == options.k) break;
    }
    results = std::move(kept);
  }
  if (options.k != 0 && results.size() > options.k) results.resize(options.k);
  return results;
}

std::vector<RankedResult> search(const SearchEngine& engine, const Query& query,
                                 UserProfile& profile, std::int64_t timestamp,
                                 const SearchOptions& options) {
  const ConceptVector q = build_query_vector(query, engine.ontology());
  auto results = engine.rank(q, &profile, options);
  update_profile(profile, q, timestamp, engine.ontology());
  return results;
}

}  // namespace xpir
