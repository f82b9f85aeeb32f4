#include "xpir/concept_index.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "xpir/error.hpp"

namespace xpir {

namespace {

bool word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

template <class Entry>
auto by_start(std::span<const Entry> entries, std::uint32_t lo, std::uint32_t hi) {
  auto first = std::upper_bound(entries.begin(), entries.end(), lo,
                                [](std::uint32_t s, const Entry& e) { return s < e.start; });
  auto last = std::lower_bound(first, entries.end(), hi,
                               [](const Entry& e, std::uint32_t s) { return e.start < s; });
  return std::span<const Entry>(first, last);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (word_byte(c)) {
      cur.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c + ('a' - 'A') : c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

ConceptMatcher::ConceptMatcher(const Ontology& ontology) {
  trie_.emplace_back();
  for (ConceptIndex c = 0; c < ontology.size(); ++c) {
    for (const auto& keyword : ontology.at(c).keywords) {
      const auto words = tokenize(keyword);
      if (words.empty()) continue;
      std::uint32_t node = 0;
      for (const auto& w : words) {
        auto it = trie_[node].next.find(w);
        if (it == trie_[node].next.end()) {
          const auto fresh = static_cast<std::uint32_t>(trie_.size());
          trie_[node].next.emplace(w, fresh);
          trie_.emplace_back();
          node = fresh;
        } else {
          node = it->second;
        }
      }
      trie_[node].concepts.push_back(c);
    }
  }
  for (auto& node : trie_) {
    if (!node.concepts.empty()) node.concepts = most_specific(ontology, node.concepts);
  }
}

ConceptCounts ConceptMatcher::extract(std::string_view text) const {
  const auto words = tokenize(text);
  std::map<ConceptIndex, std::uint32_t> counts;
  std::size_t i = 0;
  while (i < words.size()) {
    std::uint32_t node = 0;
    std::size_t best_len = 0;
    std::uint32_t best_node = 0;
    for (std::size_t j = i; j < words.size(); ++j) {
      auto it = trie_[node].next.find(words[j]);
      if (it == trie_[node].next.end()) break;
      node = it->second;
      if (!trie_[node].concepts.empty()) {
        best_len = j - i + 1;
        best_node = node;
      }
    }
    if (best_len == 0) {
      ++i;
      continue;
    }
    for (ConceptIndex c : trie_[best_node].concepts) ++counts[c];
    i += best_len;
  }
  return ConceptCounts(counts.begin(), counts.end());
}

ConceptCounts extract_concepts(std::string_view text, const Ontology& ontology) {
  return ConceptMatcher(ontology).extract(text);
}

CollectionStats compute_stats(std::span<const ConceptCounts> text_counts,
                              std::size_t concept_count) {
  if (text_counts.empty()) {
    throw Error(Errc::invalid_argument, "collection has no indexed text nodes");
  }
  CollectionStats stats;
  stats.total_text_nodes = text_counts.size();
  stats.text_nodes_containing.assign(concept_count, 0);
  for (const auto& counts : text_counts) {
    for (const auto& [c, cf] : counts) {
      if (c >= concept_count) {
        throw Error(Errc::internal_consistency, "concept index out of range in counts");
      }
      if (cf > 0) ++stats.text_nodes_containing[c];
    }
  }
  return stats;
}

ConceptVector weight_text_node(const ConceptCounts& counts, const CollectionStats& stats,
                               std::span<const double> concept_weights) {
  std::vector<ConceptVector::Entry> out;
  const auto total = static_cast<double>(stats.total_text_nodes);
  for (const auto& [c, cf] : counts) {
    if (cf == 0) continue;
    if (c >= stats.text_nodes_containing.size() || c >= concept_weights.size()) {
      throw Error(Errc::internal_consistency, "concept index out of range in counts");
    }
    const std::uint32_t containing = stats.text_nodes_containing[c];
    if (containing == 0) {
      throw Error(Errc::internal_consistency,
                  "concept " + std::to_string(c) + " counted but absent from collection stats");
    }
    const double iecf = std::log(total / static_cast<double>(containing));
    const double w = static_cast<double>(cf) * iecf * concept_weights[c];
    if (w != 0.0) out.emplace_back(c, w);
  }
  return ConceptVector::from_entries(std::move(out));
}

ConceptVector weight_text_node(const ConceptCounts& counts, const CollectionStats& stats,
                               const Ontology& ontology) {
  return weight_text_node(counts, stats, ontology.weights());
}

ElementCoverage compute_coverage(const NodeDescriptor& element, const DocumentTree& tree,
                                 std::span<const TextEntry> doc_texts) {
  if (element.type != NodeType::element) {
    throw Error(Errc::invalid_argument, "coverage needs an element node");
  }
  if (element.doc != tree.doc()) {
    throw Error(Errc::cross_document, "element does not belong to this document");
  }
  ElementCoverage cov;
  std::map<ConceptIndex, std::uint32_t> containing;
  for (const auto& t : by_start(doc_texts, element.start, element.end)) {
    ++cov.text_nodes;
    for (const auto& [c, cf] : t.counts) {
      if (cf > 0) ++containing[c];
    }
  }
  cov.containing.assign(containing.begin(), containing.end());
  return cov;
}

ConceptVector propagate_to_element(const NodeDescriptor& element, const DocumentTree& tree,
                                   std::span<const TextEntry> doc_texts,
                                   const ElementCoverage& coverage) {
  if (coverage.text_nodes == 0) return {};
  auto ratio = [&](ConceptIndex c) {
    auto it = std::lower_bound(coverage.containing.begin(), coverage.containing.end(), c,
                               [](const auto& e, ConceptIndex x) { return e.first < x; });
    const std::uint32_t n = (it != coverage.containing.end() && it->first == c) ? it->second : 0;
    return static_cast<double>(n) / static_cast<double>(coverage.text_nodes);
  };

  std::map<ConceptIndex, double> sums;
  for (const auto& t : by_start(doc_texts, element.start, element.end)) {
    const NodeDescriptor* leaf = tree.find(t.start);
    if (leaf == nullptr) {
      throw Error(Errc::internal_consistency, "text entry without descriptor");
    }
    const double inv_dist = 1.0 / static_cast<double>(arc_distance(element, *leaf, tree));
    for (const auto& [c, w] : t.vector.entries()) {
      sums[c] += ratio(c) * inv_dist * w;
    }
  }
  std::vector<ConceptVector::Entry> entries(sums.begin(), sums.end());
  return ConceptVector::from_entries(std::move(entries));
}

const DocumentTree& IndexStore::document(DocId doc) const {
  if (doc == 0 || doc > documents.size()) {
    throw Error(Errc::not_found, "unknown document id " + std::to_string(doc));
  }
  return documents[doc - 1];
}

const DocumentTree* IndexStore::find_document(std::string_view name) const {
  for (const auto& d : documents) {
    if (d.name() == name) return &d;
  }
  return nullptr;
}

namespace {

template <class Entry>
std::span<const Entry> doc_slice(const std::vector<Entry>& entries, DocId doc) {
  auto lo = std::lower_bound(entries.begin(), entries.end(), doc,
                             [](const Entry& e, DocId d) { return e.doc < d; });
  auto hi = std::upper_bound(lo, entries.end(), doc,
                             [](DocId d, const Entry& e) { return d < e.doc; });
  return std::span<const Entry>(lo, hi);
}

}  // namespace

std::span<const TextEntry> IndexStore::texts_of(DocId doc) const { return doc_slice(texts, doc); }

std::span<const ElementEntry> IndexStore::elements_of(DocId doc) const {
  return doc_slice(elements, doc);
}

IndexStore build_index(std::span<const SourceDocument> documents, const Ontology& ontology,
                       const IndexOptions& options, BuildReport* report) {
  if (documents.empty()) throw Error(Errc::invalid_argument, "no documents to index");

  IndexStore index;
  index.header.ontology_fingerprint = ontology.fingerprint();
  index.header.weighting = ontology.scheme();
  index.header.attribute_text = options.attribute_text;
  index.header.build_timestamp = options.build_timestamp;

  // Phase 1: parse + extract.
  const ConceptMatcher matcher(ontology);
  for (const auto& src : documents) {
    const auto doc = static_cast<DocId>(index.documents.size() + 1);
    try {
      index.documents.push_back(parse_document(doc, src.name, std::string_view(src.xml)));
    } catch (const Error& e) {
      if (options.on_error == ErrorPolicy::abort) throw;
      if (report) report->skipped.push_back(src.name + ": " + e.what());
      if (options.progress) *options.progress << "skipped " << src.name << ": " << e.what() << "\n";
      continue;
    }
    for (const auto& n : index.documents.back().descriptors()) {
      const bool leaf = n.type == NodeType::text ||
                        (options.attribute_text && n.type == NodeType::attribute);
      if (leaf) index.texts.push_back({doc, n.start, matcher.extract(n.value), {}});
    }
  }
  if (index.documents.empty()) throw Error(Errc::invalid_argument, "every document was skipped");
  if (options.progress) {
    *options.progress << "parsed " << index.documents.size() << " documents, "
                      << index.texts.size() << " text nodes\n";
  }

  std::vector<ConceptCounts> all_counts;
  all_counts.reserve(index.texts.size());
  for (const auto& t : index.texts) all_counts.push_back(t.counts);
  index.stats = compute_stats(all_counts, ontology.size());
  index.header.total_text_nodes = index.stats.total_text_nodes;

  // Phase 2: weight text nodes, then propagate to elements.
  for (auto& t : index.texts) t.vector = weight_text_node(t.counts, index.stats, ontology);
  for (const auto& tree : index.documents) {
    const auto doc_texts = index.texts_of(tree.doc());
    for (const auto& n : tree.descriptors()) {
      if (n.type != NodeType::element) continue;
      ElementEntry e;
      e.doc = tree.doc();
      e.start = n.start;
      e.coverage = compute_coverage(n, tree, doc_texts);
      e.base = propagate_to_element(n, tree, doc_texts, e.coverage);
      index.elements.push_back(std::move(e));
    }
  }
  if (options.progress) {
    *options.progress << "indexed " << index.elements.size() << " element nodes\n";
  }
  return index;
}

std::vector<SourceDocument> read_corpus_dir(const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(directory, ec)) {
    throw Error(Errc::io, "corpus directory '" + directory + "' not found");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SourceDocument> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read '" + f.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    out.push_back({f.stem().string(), buf.str()});
  }
  return out;
}

}  // namespace xpir
