#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "xpir/concept_index.hpp"
#include "xpir/retrieval.hpp"

namespace xpir {

struct CorpusConfig {
  std::uint32_t documents = 40;
  // Relative share of documents per domain (top-level concept id).
  std::map<std::string, double> domains;
  std::uint32_t sections_min = 2, sections_max = 4;
  std::uint32_t paragraphs_min = 2, paragraphs_max = 4;
  std::uint32_t sentences_min = 2, sentences_max = 4;
  double inline_rate = 0.2;       // sentence wrapped in an inline element
  double neighbor_rate = 0.25;    // mention of a concept near the topic
  double general_rate = 0.15;     // mention of the domain concept itself
  double distractor_rate = 0.1;   // mention of a concept of another domain
  double filler_rate = 0.25;      // sentence without any concept
};

struct QuerySpec {
  std::string id;
  std::string concept_id;
  bool operator==(const QuerySpec&) const = default;
};

enum class Granularity { document, node };

/// Relevance judgments. Document-level entries use node start 0.
struct Qrels {
  Granularity granularity = Granularity::document;
  std::map<std::string, std::set<std::pair<std::string, std::uint32_t>>> relevant;
  bool operator==(const Qrels&) const = default;
};

// TREC-style lines "query_id doc_id node_start relevance".
void write_qrels(std::ostream& out, const Qrels& qrels);
Qrels read_qrels(std::istream& in, Granularity granularity);

struct GeneratedCorpus {
  std::vector<SourceDocument> documents;
  std::vector<std::string> topics;  // topic concept id per document
  std::vector<QuerySpec> queries;
  Qrels qrels;
};

/// Seeded synthetic collection. Each document has one topic concept drawn
/// from a domain subtree; its text mentions the topic, nearby concepts, the
/// general domain concept and occasional concepts of other domains. A
/// document is relevant to a query concept when its topic is that concept
/// or one of its descendants. Throws Error{config} for infeasible settings.
GeneratedCorpus generate_corpus(const Ontology& ontology, const CorpusConfig& config,
                                std::uint64_t seed, std::uint32_t query_count);

struct Metrics {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t retrieved = 0, relevant = 0, relevant_retrieved = 0;
};

double f1_score(double precision, double recall);

enum class CutoffMode { positive, top_k, relative };

/// Which ranked results count as retrieved: every result (positive), the
/// first k (top_k), or those scoring at least fraction * best (relative).
struct Cutoff {
  CutoffMode mode = CutoffMode::positive;
  std::size_t k = 10;
  double fraction = 0.5;
};

/// Node results are collapsed to their documents for document-level qrels.
/// Throws Error{invalid_argument} for an empty relevant set or k = 0.
Metrics precision_recall_f1(const std::vector<RankedResult>& ranked,
                            const std::set<std::pair<std::string, std::uint32_t>>& relevant,
                            Granularity granularity, const Cutoff& cutoff);

struct UserSpec {
  std::string id;
  std::vector<std::string> interests;  // concept ids
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string ontology_path;
  CorpusConfig corpus;
  std::uint32_t query_count = 24;
  Expansion expansion;
  std::vector<UserSpec> users;
  std::string same_user;                 // user for the repeated-request run
  std::vector<std::string> instants;     // concept ids for T1..Tn
  Cutoff cutoff;
  Granularity granularity = Granularity::document;
  bool overlap_filter = false;
  bool normalize_profile = false;
};

// Relative paths inside the file resolve against the file's directory.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(std::string_view json_text, const std::string& base_dir);

enum class Configuration { baseline, proposed };
std::string_view configuration_name(Configuration c);

struct ReportRow {
  std::string experiment;  // "same_user" or "instants"
  Configuration configuration = Configuration::proposed;
  std::string user;
  std::string instant;  // T1.. for instants, request number otherwise
  std::string query_id;
  std::string concept_id;
  Metrics metrics;
  Metrics positive;  // same request counted with the score > 0 cutoff
};

struct MeanMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t rows = 0;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  std::size_t documents = 0, element_nodes = 0, text_nodes = 0;
  std::vector<ReportRow> rows;

  MeanMetrics mean(std::string_view experiment, Configuration c, bool positive = false) const;
};

/// Baseline: uniform concept weights and no profile factor. Proposed:
/// depth-derived weights and each user's evolving profile. Profiles start
/// uniform, are warmed up once with each declared interest, then updated
/// after every request (answer first, then update).
ExperimentReport run_experiment(const ExperimentConfig& config, const Ontology& ontology);

void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_report_table(std::ostream& out, const ExperimentReport& report);

}  // namespace xpir
