#include "xpir/ontology.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xpir/error.hpp"

namespace xpir {

namespace {

using json = nlohmann::json;

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

[[noreturn]] void invalid(const std::string& id, const std::string& what) {
  throw Error(Errc::validation, "concept '" + id + "': " + what);
}

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // Field separator so that ("ab","c") and ("a","bc") differ.
  h ^= 0x1f;
  h *= 0x100000001b3ULL;
  return h;
}

std::string fingerprint_of(const std::vector<Concept>& concepts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& c : concepts) {
    h = fnv1a(h, c.id);
    h = fnv1a(h, c.label);
    for (const auto& k : c.keywords) h = fnv1a(h, "k:" + k);
    for (const auto& p : c.parents) h = fnv1a(h, "p:" + p);
    for (const auto& r : c.relations) h = fnv1a(h, "r:" + r.name + "->" + r.target);
    h = fnv1a(h, "\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void require_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw Error(Errc::parse, where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(Errc::parse, where + ": unknown field '" + key + "'");
    }
  }
}

std::vector<std::string> string_list(const json& obj, const char* key, const std::string& where) {
  std::vector<std::string> out;
  if (!obj.contains(key)) return out;
  const json& arr = obj.at(key);
  if (!arr.is_array()) throw Error(Errc::parse, where + ": '" + key + "' must be an array");
  for (const auto& v : arr) {
    if (!v.is_string()) throw Error(Errc::parse, where + ": '" + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

Ontology Ontology::build(std::string name, std::vector<Concept> concepts, WeightingScheme scheme) {
  if (concepts.empty()) throw Error(Errc::validation, "ontology has no concepts");

  Ontology o;
  o.name_ = std::move(name);
  o.scheme_ = scheme;
  o.concepts_ = std::move(concepts);
  const auto n = static_cast<ConceptIndex>(o.concepts_.size());

  for (ConceptIndex i = 0; i < n; ++i) {
    const Concept& c = o.concepts_[i];
    if (c.id.empty() || blank(c.id)) throw Error(Errc::validation, "concept with empty id");
    if (!o.by_id_.emplace(c.id, i).second) invalid(c.id, "duplicate id");
    if (c.keywords.empty()) invalid(c.id, "no keywords");
    for (const auto& k : c.keywords) {
      if (blank(k)) invalid(c.id, "empty keyword");
    }
  }

  o.parents_.resize(n);
  o.children_.resize(n);
  o.relations_.resize(n);
  std::map<std::string, std::uint32_t> relation_ids;
  for (ConceptIndex i = 0; i < n; ++i) {
    const Concept& c = o.concepts_[i];
    for (const auto& p : c.parents) {
      auto it = o.by_id_.find(p);
      if (it == o.by_id_.end()) invalid(c.id, "unknown parent '" + p + "'");
      if (it->second == i) invalid(c.id, "is-a cycle (self parent)");
      if (std::find(o.parents_[i].begin(), o.parents_[i].end(), it->second) != o.parents_[i].end()) {
        invalid(c.id, "parent '" + p + "' listed twice");
      }
      o.parents_[i].push_back(it->second);
      o.children_[it->second].push_back(i);
    }
    for (const auto& r : c.relations) {
      if (r.name.empty() || blank(r.name)) invalid(c.id, "relation with empty name");
      auto it = o.by_id_.find(r.target);
      if (it == o.by_id_.end()) invalid(c.id, "unknown relation target '" + r.target + "'");
      relation_ids.emplace(r.name, 0);
    }
  }
  for (auto& [rel, id] : relation_ids) {
    id = static_cast<std::uint32_t>(o.relation_names_.size());
    o.relation_names_.push_back(rel);
  }
  for (ConceptIndex i = 0; i < n; ++i) {
    for (const auto& r : o.concepts_[i].relations) {
      o.relations_[i].push_back({o.by_id_.at(r.target), relation_ids.at(r.name)});
    }
  }

  // Kahn's algorithm; ties resolved by index for a deterministic order.
  std::vector<std::uint32_t> pending(n);
  std::set<ConceptIndex> ready;
  for (ConceptIndex i = 0; i < n; ++i) {
    pending[i] = static_cast<std::uint32_t>(o.parents_[i].size());
    if (pending[i] == 0) {
      ready.insert(i);
      o.roots_.push_back(i);
    }
  }
  o.depth_.assign(n, 1);
  while (!ready.empty()) {
    ConceptIndex i = *ready.begin();
    ready.erase(ready.begin());
    o.topo_.push_back(i);
    for (ConceptIndex child : o.children_[i]) {
      o.depth_[child] = std::max(o.depth_[child], o.depth_[i] + 1);
      if (--pending[child] == 0) ready.insert(child);
    }
  }
  if (o.topo_.size() != n) {
    for (ConceptIndex i = 0; i < n; ++i) {
      if (pending[i] != 0) invalid(o.concepts_[i].id, "is-a cycle");
    }
  }

  o.ancestors_.resize(n);
  for (ConceptIndex i : o.topo_) {
    std::vector<ConceptIndex> acc;
    for (ConceptIndex p : o.parents_[i]) {
      acc.push_back(p);
      acc.insert(acc.end(), o.ancestors_[p].begin(), o.ancestors_[p].end());
    }
    std::sort(acc.begin(), acc.end());
    acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
    o.ancestors_[i] = std::move(acc);
  }

  o.fingerprint_ = fingerprint_of(o.concepts_);
  o.compute_weights();
  return o;
}

void Ontology::compute_weights() {
  coef_exact_ = assign_coefficients(*this);
  coef_.clear();
  for (const auto& c : coef_exact_) coef_.push_back(static_cast<double>(c));
  coef_avg_ = static_cast<double>(compute_avg_coefficient(coef_exact_));

  margin_.reset();
  try {
    margin_ = static_cast<double>(compute_margin(coef_exact_, Rational(1)));
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate_ontology) throw;
  }

  weights_.clear();
  if (scheme_ == WeightingScheme::uniform) {
    weights_.assign(size(), 1.0 / static_cast<double>(size()));
    return;
  }
  std::vector<std::string> ids;
  for (const auto& c : concepts_) ids.push_back(c.id);
  for (const auto& w : compute_real_weights(coef_exact_, ids)) {
    weights_.push_back(static_cast<double>(w));
  }
}

Ontology Ontology::with_scheme(WeightingScheme scheme) const {
  Ontology copy = *this;
  copy.scheme_ = scheme;
  copy.compute_weights();
  return copy;
}

std::optional<ConceptIndex> Ontology::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

ConceptIndex Ontology::index_of(std::string_view id) const {
  if (auto idx = find(id)) return *idx;
  throw Error(Errc::unknown_concept, "unknown concept '" + std::string(id) + "'");
}

std::optional<std::uint32_t> Ontology::find_relation(std::string_view name) const {
  auto it = std::find(relation_names_.begin(), relation_names_.end(), name);
  if (it == relation_names_.end()) return std::nullopt;
  return static_cast<std::uint32_t>(it - relation_names_.begin());
}

bool Ontology::is_strict_ancestor(ConceptIndex ancestor, ConceptIndex descendant) const {
  const auto& acc = ancestors_.at(descendant);
  return std::binary_search(acc.begin(), acc.end(), ancestor);
}

std::vector<ConceptIndex> Ontology::descendants(ConceptIndex idx) const {
  std::vector<ConceptIndex> out;
  for (ConceptIndex i = 0; i < size(); ++i) {
    if (is_strict_ancestor(idx, i)) out.push_back(i);
  }
  return out;
}

std::vector<Rational> assign_coefficients(const Ontology& ontology) {
  std::vector<Rational> coef(ontology.size());
  for (ConceptIndex i : ontology.topological_order()) {
    auto parents = ontology.parents(i);
    if (parents.empty()) {
      coef[i] = Rational(1);
      continue;
    }
    Rational sum(0);
    Rational highest = coef[parents.front()];
    for (ConceptIndex p : parents) {
      sum += coef[p];
      highest = std::max(highest, coef[p]);
    }
    Rational mean = sum / static_cast<long>(parents.size());
    coef[i] = std::max(Rational(mean + 1), Rational(highest + Rational(1, 2)));
  }
  return coef;
}

Rational compute_margin(std::span<const Rational> coefficients, const Rational& root_coefficient,
                        const Rational& total_weight) {
  Rational spread(0);
  for (const auto& c : coefficients) spread += c - root_coefficient;
  if (spread == 0) {
    throw Error(Errc::degenerate_ontology,
                "all coefficients equal the root coefficient; margin undefined");
  }
  return total_weight / (spread * spread);
}

Rational compute_avg_coefficient(std::span<const Rational> coefficients) {
  if (coefficients.empty()) throw Error(Errc::invalid_argument, "empty ontology");
  Rational sum(0);
  for (const auto& c : coefficients) sum += c;
  return sum / static_cast<long>(coefficients.size());
}

std::vector<Rational> compute_real_weights(std::span<const Rational> coefficients,
                                           std::span<const std::string> ids) {
  const auto n = static_cast<long>(coefficients.size());
  if (n == 0) throw Error(Errc::invalid_argument, "empty ontology");
  const Rational avg_weight(1, n);
  const Rational root = *std::min_element(coefficients.begin(), coefficients.end());

  Rational margin;
  try {
    margin = compute_margin(coefficients, root);
  } catch (const Error& e) {
    if (e.code() != Errc::degenerate_ontology) throw;
    return std::vector<Rational>(coefficients.size(), avg_weight);
  }
  const Rational coef_avg = compute_avg_coefficient(coefficients);

  std::vector<Rational> weights;
  weights.reserve(coefficients.size());
  for (std::size_t k = 0; k < coefficients.size(); ++k) {
    Rational w = avg_weight + margin * (coefficients[k] - coef_avg);
    if (w <= 0) {
      const std::string id = k < ids.size() ? ids[k] : std::to_string(k);
      throw Error(Errc::invalid_weighting,
                  "concept '" + id + "' gets non-positive weight " +
                      std::to_string(static_cast<double>(w)));
    }
    weights.push_back(std::move(w));
  }
  return weights;
}

std::vector<RelatedConcept> related_concepts(const Ontology& ontology, ConceptIndex seed,
                                             std::span<const std::string> relation_names,
                                             std::uint32_t max_hops) {
  if (seed >= ontology.size()) {
    throw Error(Errc::unknown_concept, "unknown concept index " + std::to_string(seed));
  }
  std::vector<bool> follow(ontology.relation_names().size(), false);
  for (const auto& name : relation_names) {
    auto rel = ontology.find_relation(name);
    if (!rel) throw Error(Errc::unknown_relation, "unknown relation '" + name + "'");
    follow[*rel] = true;
  }

  std::vector<std::uint32_t> hops(ontology.size(), UINT32_MAX);
  std::deque<ConceptIndex> queue{seed};
  hops[seed] = 0;
  while (!queue.empty()) {
    ConceptIndex cur = queue.front();
    queue.pop_front();
    if (hops[cur] == max_hops) continue;
    auto visit = [&](ConceptIndex next) {
      if (hops[next] == UINT32_MAX) {
        hops[next] = hops[cur] + 1;
        queue.push_back(next);
      }
    };
    for (ConceptIndex child : ontology.children(cur)) visit(child);
    for (const auto& edge : ontology.relations(cur)) {
      if (follow[edge.relation]) visit(edge.target);
    }
  }

  std::vector<RelatedConcept> out;
  for (ConceptIndex i = 0; i < ontology.size(); ++i) {
    if (hops[i] != UINT32_MAX) out.push_back({i, hops[i]});
  }
  std::sort(out.begin(), out.end(), [&](const RelatedConcept& a, const RelatedConcept& b) {
    if (a.hops != b.hops) return a.hops < b.hops;
    return ontology.id_of(a.concept_index) < ontology.id_of(b.concept_index);
  });
  return out;
}

std::vector<ConceptIndex> most_specific(const Ontology& ontology,
                                        std::span<const ConceptIndex> concepts) {
  std::vector<ConceptIndex> in(concepts.begin(), concepts.end());
  for (ConceptIndex c : in) {
    if (c >= ontology.size()) {
      throw Error(Errc::unknown_concept, "unknown concept index " + std::to_string(c));
    }
  }
  std::sort(in.begin(), in.end());
  in.erase(std::unique(in.begin(), in.end()), in.end());
  std::vector<ConceptIndex> out;
  for (ConceptIndex c : in) {
    bool has_descendant = std::any_of(in.begin(), in.end(), [&](ConceptIndex other) {
      return ontology.is_strict_ancestor(c, other);
    });
    if (!has_descendant) out.push_back(c);
  }
  return out;
}

Ontology load_ontology(std::istream& source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse, std::string("ontology: ") + e.what());
  }
  require_keys(doc, {"name", "concepts"}, "ontology");
  if (!doc.contains("name") || !doc["name"].is_string()) {
    throw Error(Errc::parse, "ontology: 'name' must be a string");
  }
  if (!doc.contains("concepts") || !doc["concepts"].is_array()) {
    throw Error(Errc::parse, "ontology: 'concepts' must be an array");
  }

  std::vector<Concept> concepts;
  for (const auto& item : doc["concepts"]) {
    require_keys(item, {"id", "label", "keywords", "parents", "relations"}, "concept");
    if (!item.contains("id") || !item["id"].is_string()) {
      throw Error(Errc::parse, "concept: 'id' must be a string");
    }
    Concept c;
    c.id = item["id"].get<std::string>();
    const std::string where = "concept '" + c.id + "'";
    if (item.contains("label")) {
      if (!item["label"].is_string()) throw Error(Errc::parse, where + ": 'label' must be a string");
      c.label = item["label"].get<std::string>();
    } else {
      c.label = c.id;
    }
    c.keywords = string_list(item, "keywords", where);
    c.parents = string_list(item, "parents", where);
    if (item.contains("relations")) {
      if (!item["relations"].is_array()) {
        throw Error(Errc::parse, where + ": 'relations' must be an array");
      }
      for (const auto& r : item["relations"]) {
        require_keys(r, {"name", "target"}, where + " relation");
        if (!r.contains("name") || !r["name"].is_string() || !r.contains("target") ||
            !r["target"].is_string()) {
          throw Error(Errc::parse, where + ": relation needs string 'name' and 'target'");
        }
        c.relations.push_back({r["name"].get<std::string>(), r["target"].get<std::string>()});
      }
    }
    concepts.push_back(std::move(c));
  }
  return Ontology::build(doc["name"].get<std::string>(), std::move(concepts));
}

Ontology load_ontology_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open ontology file '" + path + "'");
  return load_ontology(in);
}

std::string ontology_to_json(const Ontology& ontology) {
  json doc;
  doc["name"] = ontology.name();
  doc["concepts"] = json::array();
  for (const auto& c : ontology.concepts()) {
    json item{{"id", c.id}, {"label", c.label}, {"keywords", c.keywords}, {"parents", c.parents}};
    item["relations"] = json::array();
    for (const auto& r : c.relations) item["relations"].push_back({{"name", r.name}, {"target", r.target}});
    doc["concepts"].push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

}  // namespace xpir
