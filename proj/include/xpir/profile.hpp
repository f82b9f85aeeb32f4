#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xpir/concept_vector.hpp"
#include "xpir/ontology.hpp"

namespace xpir {

struct QueryRecord {
  std::int64_t timestamp = 0;  // caller-supplied logical time
  ConceptVector query;

  bool operator==(const QueryRecord&) const = default;
};

/// Centers-of-interest vector of one user, one weight per ontology concept,
/// plus the query history that produced it.
struct UserProfile {
  std::string user_id;
  std::string ontology_fingerprint;
  std::vector<double> interests;  // indexed by ConceptIndex
  std::vector<QueryRecord> history;

  bool operator==(const UserProfile&) const = default;
};

// Uniform prior 1/|C|, empty history.
UserProfile create_profile(std::string user_id, const Ontology& ontology);

/// w_CI_j += e^{w_tj} - 1 for every concept of the query, then appends the
/// query to the history. Throws Error{stale_profile} when the profile was
/// built against another ontology, Error{unknown_concept} for an index out of
/// range and Error{invalid_argument} for negative query weights.
void update_profile(UserProfile& profile, const ConceptVector& query, std::int64_t timestamp,
                    const Ontology& ontology);

double interest_weight(const UserProfile& profile, ConceptIndex concept_index);
double interest_weight(const UserProfile& profile, std::string_view concept_id,
                       const Ontology& ontology);

// Rebuilds a profile from the uniform prior by re-applying `history`.
UserProfile replay_profile(std::string user_id, std::span<const QueryRecord> history,
                           const Ontology& ontology);

void check_fingerprint(const UserProfile& profile, const Ontology& ontology);

/// JSON document {user_id, ontology_fingerprint, weights: {id: w},
/// history: [{timestamp, query: {id: w}}]}. Doubles round-trip exactly.
std::string profile_to_json(const UserProfile& profile, const Ontology& ontology);
UserProfile profile_from_json(std::string_view text, const Ontology& ontology);

}  // namespace xpir
