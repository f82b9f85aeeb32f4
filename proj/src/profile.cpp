#include "xpir/profile.hpp"

#include <cmath>

#include <json.hpp>

#include "xpir/error.hpp"

namespace xpir {

using nlohmann::json;

UserProfile create_profile(std::string user_id, const Ontology& ontology) {
  if (user_id.empty()) throw Error(Errc::invalid_argument, "user id must not be empty");
  UserProfile p;
  p.user_id = std::move(user_id);
  p.ontology_fingerprint = ontology.fingerprint();
  p.interests.assign(ontology.size(), 1.0 / static_cast<double>(ontology.size()));
  return p;
}

void check_fingerprint(const UserProfile& profile, const Ontology& ontology) {
  if (profile.ontology_fingerprint != ontology.fingerprint() ||
      profile.interests.size() != ontology.size()) {
    throw Error(Errc::stale_profile, "profile of '" + profile.user_id + "' was built for ontology " +
                                         profile.ontology_fingerprint + ", loaded ontology is " +
                                         ontology.fingerprint());
  }
}

void update_profile(UserProfile& profile, const ConceptVector& query, std::int64_t timestamp,
                    const Ontology& ontology) {
  check_fingerprint(profile, ontology);
  for (const auto& [c, w] : query.entries()) {
    if (c >= profile.interests.size()) {
      throw Error(Errc::unknown_concept, "query concept index " + std::to_string(c) +
                                             " is outside the ontology");
    }
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(Errc::invalid_argument, "query weights must be finite and non-negative");
    }
  }
  for (const auto& [c, w] : query.entries()) profile.interests[c] += std::expm1(w);
  profile.history.push_back({timestamp, query});
}

double interest_weight(const UserProfile& profile, ConceptIndex concept_index) {
  if (concept_index >= profile.interests.size()) {
    throw Error(Errc::unknown_concept, "concept index " + std::to_string(concept_index) +
                                           " is outside the profile");
  }
  return profile.interests[concept_index];
}

double interest_weight(const UserProfile& profile, std::string_view concept_id,
                       const Ontology& ontology) {
  check_fingerprint(profile, ontology);
  return profile.interests[ontology.index_of(concept_id)];
}

UserProfile replay_profile(std::string user_id, std::span<const QueryRecord> history,
                           const Ontology& ontology) {
  UserProfile p = create_profile(std::move(user_id), ontology);
  for (const auto& r : history) update_profile(p, r.query, r.timestamp, ontology);
  return p;
}

namespace {

json vector_to_json(const ConceptVector& v, const Ontology& ontology) {
  json out = json::object();
  for (const auto& [c, w] : v.entries()) out[ontology.id_of(c)] = w;
  return out;
}

ConceptVector vector_from_json(const json& j, const Ontology& ontology) {
  if (!j.is_object()) throw Error(Errc::validation, "concept vector must be an object");
  std::vector<ConceptVector::Entry> entries;
  for (const auto& [id, w] : j.items()) {
    if (!w.is_number()) throw Error(Errc::validation, "weight of '" + id + "' is not a number");
    entries.emplace_back(ontology.index_of(id), w.get<double>());
  }
  return ConceptVector::from_entries(std::move(entries));
}

}  // namespace

std::string profile_to_json(const UserProfile& profile, const Ontology& ontology) {
  check_fingerprint(profile, ontology);
  json weights = json::object();
  for (ConceptIndex c = 0; c < profile.interests.size(); ++c) {
    weights[ontology.id_of(c)] = profile.interests[c];
  }
  json history = json::array();
  for (const auto& r : profile.history) {
    history.push_back({{"timestamp", r.timestamp}, {"query", vector_to_json(r.query, ontology)}});
  }
  json out = {{"user_id", profile.user_id},
              {"ontology_fingerprint", profile.ontology_fingerprint},
              {"weights", std::move(weights)},
              {"history", std::move(history)}};
  return out.dump(2);
}

UserProfile profile_from_json(std::string_view text, const Ontology& ontology) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse, std::string("profile: ") + e.what());
  }
  try {
    UserProfile p;
    p.user_id = j.at("user_id").get<std::string>();
    p.ontology_fingerprint = j.at("ontology_fingerprint").get<std::string>();
    if (p.ontology_fingerprint != ontology.fingerprint()) {
      throw Error(Errc::stale_profile, "profile of '" + p.user_id + "' was built for ontology " +
                                           p.ontology_fingerprint);
    }
    const json& weights = j.at("weights");
    if (!weights.is_object() || weights.size() != ontology.size()) {
      throw Error(Errc::validation, "profile weights must list every ontology concept once");
    }
    const double prior = 1.0 / static_cast<double>(ontology.size());
    p.interests.assign(ontology.size(), 0.0);
    for (const auto& [id, w] : weights.items()) {
      const double v = w.get<double>();
      if (!(v >= prior)) {
        throw Error(Errc::validation, "weight of '" + id + "' is below the uniform prior");
      }
      p.interests[ontology.index_of(id)] = v;
    }
    for (const auto& r : j.at("history")) {
      p.history.push_back({r.at("timestamp").get<std::int64_t>(),
                           vector_from_json(r.at("query"), ontology)});
    }
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("profile: ") + e.what());
  }
}

}  // namespace xpir
