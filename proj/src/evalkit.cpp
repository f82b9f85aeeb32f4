#include "xpir/evalkit.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "xpir/error.hpp"

namespace xpir {

namespace {

// Draws are built from raw engine output so the corpus is the same on every
// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  std::uint32_t between(std::uint32_t lo, std::uint32_t hi) {
    return lo + static_cast<std::uint32_t>(below(hi - lo + 1));
  }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kMentionTemplates = {
    "This part explains {} with a short example.",
    "Practical notes on {} follow.",
    "The design relies on {} at several points.",
    "We compare several views of {}.",
    "A worked example shows how {} behaves.",
    "Common pitfalls around {} are listed below.",
};

const std::vector<std::string> kFiller = {
    "The discussion stays informal here.",
    "Readers may skip the details on a first pass.",
    "Results are summarized at the end.",
    "Exercises appear after the main text.",
    "Figures are omitted from this version.",
};

const std::vector<std::string> kInline = {"em", "b", "term"};

std::string fill(const std::string& tmpl, const std::string& keyword) {
  std::string out = tmpl;
  out.replace(out.find("{}"), 2, keyword);
  return out;
}

std::string capitalized(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Domain {
  ConceptIndex root;
  double share;
  std::vector<ConceptIndex> subtree;  // root first, then descendants by index
};

class DocumentWriter {
 public:
  DocumentWriter(const Ontology& onto, const CorpusConfig& cfg, Rng& rng,
                 const std::vector<Domain>& domains)
      : onto_(onto), cfg_(cfg), rng_(rng), domains_(domains) {}

  std::string write(const std::string& name, std::size_t domain, ConceptIndex topic) {
    const Domain& d = domains_[domain];
    neighbors_.clear();
    for (ConceptIndex c : d.subtree) {
      if (c == topic) continue;
      const bool related = onto_.is_strict_ancestor(c, topic) || onto_.is_strict_ancestor(topic, c) ||
                           shares_parent(c, topic);
      if (related) neighbors_.push_back(c);
    }
    others_.clear();
    for (std::size_t i = 0; i < domains_.size(); ++i) {
      if (i != domain) others_.insert(others_.end(), domains_[i].subtree.begin(), domains_[i].subtree.end());
    }

    std::string x = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    x += "<article id=\"" + name + "\" topic=\"" + onto_.id_of(topic) + "\">\n";
    x += "  <title>" + xml_escape(capitalized(keyword(topic))) + " in practice</title>\n";
    const std::uint32_t sections = rng_.between(cfg_.sections_min, cfg_.sections_max);
    for (std::uint32_t s = 0; s < sections; ++s) {
      x += "  <section>\n";
      const ConceptIndex head = (neighbors_.empty() || rng_.chance(0.5)) ? topic : rng_.pick(neighbors_);
      x += "    <heading>" + xml_escape(capitalized(keyword(head))) + "</heading>\n";
      const std::uint32_t paras = rng_.between(cfg_.paragraphs_min, cfg_.paragraphs_max);
      for (std::uint32_t p = 0; p < paras; ++p) x += "    <para>" + paragraph(topic, d.root) + "</para>\n";
      x += "  </section>\n";
    }
    x += "</article>\n";
    return x;
  }

 private:
  bool shares_parent(ConceptIndex a, ConceptIndex b) const {
    for (ConceptIndex p : onto_.parents(a)) {
      const auto pb = onto_.parents(b);
      if (std::find(pb.begin(), pb.end(), p) != pb.end()) return true;
    }
    return false;
  }

  const std::string& keyword(ConceptIndex c) { return rng_.pick(onto_.at(c).keywords); }

  std::string paragraph(ConceptIndex topic, ConceptIndex domain_root) {
    const std::uint32_t n = rng_.between(cfg_.sentences_min, cfg_.sentences_max);
    std::string out;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (i > 0) out += ' ';
      const double r = rng_.unit();
      double acc = cfg_.filler_rate;
      if (r < acc) {
        out += rng_.pick(kFiller);
        continue;
      }
      ConceptIndex c = topic;
      if (r < (acc += cfg_.distractor_rate) && !others_.empty()) {
        c = rng_.pick(others_);
      } else if (r < (acc += cfg_.general_rate)) {
        c = domain_root;
      } else if (r < (acc += cfg_.neighbor_rate) && !neighbors_.empty()) {
        c = rng_.pick(neighbors_);
      }
      std::string kw = xml_escape(keyword(c));
      if (rng_.chance(cfg_.inline_rate)) {
        const std::string& tag = rng_.pick(kInline);
        kw = "<" + tag + ">" + kw + "</" + tag + ">";
      }
      const std::string sentence = fill(rng_.pick(kMentionTemplates), kw);
      out += sentence;
    }
    return out;
  }

  const Ontology& onto_;
  const CorpusConfig& cfg_;
  Rng& rng_;
  const std::vector<Domain>& domains_;
  std::vector<ConceptIndex> neighbors_;
  std::vector<ConceptIndex> others_;
};

std::set<std::pair<std::string, std::uint32_t>> relevant_for(const GeneratedCorpus& corpus,
                                                             const Ontology& onto,
                                                             ConceptIndex query) {
  std::set<std::pair<std::string, std::uint32_t>> out;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const ConceptIndex t = onto.index_of(corpus.topics[i]);
    if (t == query || onto.is_strict_ancestor(query, t)) out.emplace(corpus.documents[i].name, 0);
  }
  return out;
}

}  // namespace

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [query, docs] : qrels.relevant) {
    for (const auto& [doc, start] : docs) out << query << ' ' << doc << ' ' << start << " 1\n";
  }
}

Qrels read_qrels(std::istream& in, Granularity granularity) {
  Qrels q;
  q.granularity = granularity;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string query, doc;
    long long start = -1;
    int relevance = 0;
    if (!(fields >> query >> doc >> start >> relevance) || start < 0) {
      throw Error(Errc::parse, "qrels line " + std::to_string(lineno) + " is malformed");
    }
    if (relevance > 0) q.relevant[query].emplace(doc, static_cast<std::uint32_t>(start));
  }
  return q;
}

GeneratedCorpus generate_corpus(const Ontology& ontology, const CorpusConfig& config,
                                std::uint64_t seed, std::uint32_t query_count) {
  if (config.documents == 0) throw Error(Errc::config, "corpus needs at least one document");
  if (config.domains.size() < 2) throw Error(Errc::config, "corpus needs at least two domains");
  if (config.sections_min == 0 || config.sections_min > config.sections_max ||
      config.paragraphs_min == 0 || config.paragraphs_min > config.paragraphs_max ||
      config.sentences_min == 0 || config.sentences_min > config.sentences_max) {
    throw Error(Errc::config, "section, paragraph and sentence ranges must be non-empty");
  }
  const double rates = config.filler_rate + config.distractor_rate + config.general_rate +
                       config.neighbor_rate;
  if (rates > 1.0 || config.filler_rate < 0 || config.distractor_rate < 0 ||
      config.general_rate < 0 || config.neighbor_rate < 0 || config.inline_rate < 0 ||
      config.inline_rate > 1) {
    throw Error(Errc::config, "mention rates must be non-negative and sum to at most 1");
  }

  std::vector<Domain> domains;
  double total_share = 0;
  for (const auto& [id, share] : config.domains) {
    const auto idx = ontology.find(id);
    if (!idx) throw Error(Errc::config, "unknown domain concept '" + id + "'");
    if (!(share > 0)) throw Error(Errc::config, "domain '" + id + "' needs a positive share");
    Domain d{*idx, share, {*idx}};
    for (ConceptIndex c : ontology.descendants(*idx)) d.subtree.push_back(c);
    domains.push_back(std::move(d));
    total_share += share;
  }
  for (std::size_t i = 0; i < domains.size(); ++i) {
    for (std::size_t j = 0; j < domains.size(); ++j) {
      if (i != j && ontology.is_strict_ancestor(domains[i].root, domains[j].root)) {
        throw Error(Errc::config, "domains must not contain each other");
      }
    }
  }

  Rng rng(seed);
  GeneratedCorpus corpus;
  DocumentWriter writer(ontology, config, rng, domains);
  // Domains are assigned by largest remainder so shares hold exactly.
  std::vector<std::size_t> per_domain(domains.size(), 0);
  {
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < domains.size(); ++i) {
      const double exact = config.documents * domains[i].share / total_share;
      per_domain[i] = static_cast<std::size_t>(exact);
      assigned += per_domain[i];
      remainders.emplace_back(-(exact - static_cast<double>(per_domain[i])), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t r = 0; assigned < config.documents; ++r, ++assigned) ++per_domain[remainders[r].second];
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < domains.size(); ++i) order.insert(order.end(), per_domain[i], i);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  for (std::size_t n = 0; n < order.size(); ++n) {
    const Domain& d = domains[order[n]];
    const ConceptIndex topic = rng.pick(d.subtree);
    char name[32];
    std::snprintf(name, sizeof name, "doc%03zu", n + 1);
    corpus.documents.push_back({name, writer.write(name, order[n], topic)});
    corpus.topics.push_back(ontology.id_of(topic));
  }

  // Queries: concepts with at least one relevant document, domains first,
  // then a seeded sample of the rest.
  std::vector<ConceptIndex> candidates;
  std::vector<ConceptIndex> roots;
  for (const auto& d : domains) {
    for (ConceptIndex c : d.subtree) {
      if (relevant_for(corpus, ontology, c).empty()) continue;
      (c == d.root ? roots : candidates).push_back(c);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng.below(i)]);
  std::vector<ConceptIndex> chosen = roots;
  for (ConceptIndex c : candidates) {
    if (chosen.size() >= query_count) break;
    chosen.push_back(c);
  }
  if (chosen.size() < query_count) {
    throw Error(Errc::config, "only " + std::to_string(chosen.size()) +
                                  " concepts have relevant documents; " +
                                  std::to_string(query_count) + " queries requested");
  }
  chosen.resize(query_count);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "q%02zu", i + 1);
    corpus.queries.push_back({id, ontology.id_of(chosen[i])});
    corpus.qrels.relevant[id] = relevant_for(corpus, ontology, chosen[i]);
  }
  return corpus;
}

double f1_score(double precision, double recall) {
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

Metrics precision_recall_f1(const std::vector<RankedResult>& ranked,
                            const std::set<std::pair<std::string, std::uint32_t>>& relevant,
                            Granularity granularity, const Cutoff& cutoff) {
  if (relevant.empty()) throw Error(Errc::invalid_argument, "no relevant items for this query");
  if (cutoff.mode == CutoffMode::top_k && cutoff.k == 0) {
    throw Error(Errc::invalid_argument, "cutoff k must be at least 1");
  }
  std::size_t take = ranked.size();
  if (cutoff.mode == CutoffMode::top_k) {
    take = std::min(take, cutoff.k);
  } else if (cutoff.mode == CutoffMode::relative && !ranked.empty()) {
    const double bar = ranked.front().score * cutoff.fraction;
    take = 0;
    while (take < ranked.size() && ranked[take].score >= bar) ++take;
  }
  std::set<std::pair<std::string, std::uint32_t>> retrieved;
  for (std::size_t i = 0; i < take; ++i) {
    const auto& r = ranked[i];
    retrieved.emplace(r.doc_name, granularity == Granularity::document ? 0 : r.start);
  }
  Metrics m;
  m.retrieved = retrieved.size();
  m.relevant = relevant.size();
  for (const auto& item : retrieved) m.relevant_retrieved += relevant.count(item);
  m.precision = m.retrieved == 0 ? 0.0 : static_cast<double>(m.relevant_retrieved) / m.retrieved;
  m.recall = static_cast<double>(m.relevant_retrieved) / m.relevant;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw Error(Errc::config, std::string(where) + ": unknown field '" + k + "'");
    }
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_range(const json& j, const char* key, std::uint32_t& lo, std::uint32_t& hi) {
  if (!j.contains(key)) return;
  const auto& r = j.at(key);
  if (!r.is_array() || r.size() != 2) {
    throw Error(Errc::config, std::string(key) + " must be a [min, max] pair");
  }
  lo = r[0].get<std::uint32_t>();
  hi = r[1].get<std::uint32_t>();
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse, std::string("experiment config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    reject_unknown(j, {"seed", "ontology", "corpus", "queries", "users", "same_user", "instants",
                       "retrieval"},
                   "config");
    c.seed = j.at("seed").get<std::uint64_t>();
    const std::filesystem::path onto = j.at("ontology").get<std::string>();
    c.ontology_path = onto.is_absolute() ? onto.string() : (std::filesystem::path(base_dir) / onto).string();

    const json& corpus = j.at("corpus");
    reject_unknown(corpus, {"documents", "domains", "sections", "paragraphs", "sentences",
                            "inline_rate", "neighbor_rate", "general_rate", "distractor_rate",
                            "filler_rate"},
                   "corpus");
    auto& cc = c.corpus;
    read_opt(corpus, "documents", cc.documents);
    cc.domains = corpus.at("domains").get<std::map<std::string, double>>();
    read_range(corpus, "sections", cc.sections_min, cc.sections_max);
    read_range(corpus, "paragraphs", cc.paragraphs_min, cc.paragraphs_max);
    read_range(corpus, "sentences", cc.sentences_min, cc.sentences_max);
    read_opt(corpus, "inline_rate", cc.inline_rate);
    read_opt(corpus, "neighbor_rate", cc.neighbor_rate);
    read_opt(corpus, "general_rate", cc.general_rate);
    read_opt(corpus, "distractor_rate", cc.distractor_rate);
    read_opt(corpus, "filler_rate", cc.filler_rate);

    if (j.contains("queries")) {
      const json& q = j.at("queries");
      reject_unknown(q, {"count", "relations", "max_hops"}, "queries");
      read_opt(q, "count", c.query_count);
      read_opt(q, "relations", c.expansion.relations);
      read_opt(q, "max_hops", c.expansion.max_hops);
    }
    for (const auto& u : j.at("users")) {
      reject_unknown(u, {"id", "interests"}, "user");
      c.users.push_back({u.at("id").get<std::string>(),
                         u.value("interests", std::vector<std::string>{})});
    }
    c.same_user = j.at("same_user").get<std::string>();
    read_opt(j, "instants", c.instants);

    if (j.contains("retrieval")) {
      const json& r = j.at("retrieval");
      reject_unknown(r, {"cutoff", "k", "fraction", "granularity", "overlap_filter",
                         "normalize_profile"},
                     "retrieval");
      const std::string mode = r.value("cutoff", "positive");
      if (mode == "positive") {
        c.cutoff.mode = CutoffMode::positive;
      } else if (mode == "top_k") {
        c.cutoff.mode = CutoffMode::top_k;
      } else if (mode == "relative") {
        c.cutoff.mode = CutoffMode::relative;
      } else {
        throw Error(Errc::config, "unknown cutoff '" + mode + "'");
      }
      read_opt(r, "k", c.cutoff.k);
      read_opt(r, "fraction", c.cutoff.fraction);
      const std::string gran = r.value("granularity", "document");
      if (gran == "document") {
        c.granularity = Granularity::document;
      } else if (gran == "node") {
        c.granularity = Granularity::node;
      } else {
        throw Error(Errc::config, "unknown granularity '" + gran + "'");
      }
      read_opt(r, "overlap_filter", c.overlap_filter);
      read_opt(r, "normalize_profile", c.normalize_profile);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("experiment config: ") + e.what());
  }
  if (c.granularity == Granularity::node) {
    throw Error(Errc::config, "the generator only judges documents; use document granularity");
  }
  if (c.cutoff.mode == CutoffMode::top_k && c.cutoff.k == 0) {
    throw Error(Errc::config, "cutoff k must be at least 1");
  }
  if (c.cutoff.mode == CutoffMode::relative && !(c.cutoff.fraction > 0 && c.cutoff.fraction <= 1)) {
    throw Error(Errc::config, "cutoff fraction must be in (0, 1]");
  }
  const bool known = std::any_of(c.users.begin(), c.users.end(),
                                 [&](const UserSpec& u) { return u.id == c.same_user; });
  if (!known) throw Error(Errc::config, "same_user '" + c.same_user + "' is not in users");
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_experiment_config(buf.str(), dir.empty() ? "." : dir);
}

std::string_view configuration_name(Configuration c) {
  return c == Configuration::baseline ? "baseline" : "proposed";
}

MeanMetrics ExperimentReport::mean(std::string_view experiment, Configuration c, bool positive) const {
  MeanMetrics m;
  for (const auto& r : rows) {
    if (r.experiment != experiment || r.configuration != c) continue;
    const Metrics& x = positive ? r.positive : r.metrics;
    m.precision += x.precision;
    m.recall += x.recall;
    m.f1 += x.f1;
    ++m.rows;
  }
  if (m.rows > 0) {
    m.precision /= static_cast<double>(m.rows);
    m.recall /= static_cast<double>(m.rows);
    m.f1 /= static_cast<double>(m.rows);
  }
  return m;
}

ExperimentReport run_experiment(const ExperimentConfig& config, const Ontology& ontology) {
  const GeneratedCorpus corpus =
      generate_corpus(ontology, config.corpus, config.seed, config.query_count);
  const Ontology uniform = ontology.with_scheme(WeightingScheme::uniform);
  const IndexStore proposed_index = build_index(corpus.documents, ontology);
  const IndexStore baseline_index = build_index(corpus.documents, uniform);
  const SearchEngine proposed(proposed_index, ontology);
  const SearchEngine baseline(baseline_index, uniform);

  ExperimentReport report;
  report.seed = config.seed;
  report.documents = proposed_index.documents.size();
  report.text_nodes = proposed_index.texts.size();
  report.element_nodes = proposed_index.elements.size();

  SearchOptions opts;
  opts.k = 0;
  opts.overlap_filter = config.overlap_filter;
  opts.normalize_profile = config.normalize_profile;
  SearchOptions no_profile = opts;
  no_profile.use_profile = false;
  const Cutoff positive{};

  std::int64_t clock = 0;
  auto fresh_profile = [&](const UserSpec& u) {
    UserProfile p = create_profile(u.id, ontology);
    for (const auto& interest : u.interests) {
      Query q;
      q.seed_concept = interest;
      q.expansion = config.expansion;
      update_profile(p, build_query_vector(q, ontology), clock++, ontology);
    }
    return p;
  };
  auto vector_for = [&](const std::string& concept_id) {
    Query q;
    q.seed_concept = concept_id;
    q.expansion = config.expansion;
    return build_query_vector(q, ontology);
  };
  auto row = [&](std::string experiment, Configuration c, const std::string& user,
                 std::string instant, const std::string& query_id, const std::string& concept_id,
                 const std::vector<RankedResult>& ranked,
                 const std::set<std::pair<std::string, std::uint32_t>>& relevant) {
    ReportRow r;
    r.experiment = std::move(experiment);
    r.configuration = c;
    r.user = user;
    r.instant = std::move(instant);
    r.query_id = query_id;
    r.concept_id = concept_id;
    r.metrics = precision_recall_f1(ranked, relevant, config.granularity, config.cutoff);
    r.positive = precision_recall_f1(ranked, relevant, config.granularity, positive);
    report.rows.push_back(std::move(r));
  };

  // Repeated requests of one user.
  const UserSpec& same = *std::find_if(config.users.begin(), config.users.end(),
                                       [&](const UserSpec& u) { return u.id == config.same_user; });
  {
    UserProfile p = fresh_profile(same);
    for (std::size_t i = 0; i < corpus.queries.size(); ++i) {
      const auto& q = corpus.queries[i];
      const ConceptVector v = vector_for(q.concept_id);
      const auto& relevant = corpus.qrels.relevant.at(q.id);
      row("same_user", Configuration::baseline, same.id, std::to_string(i + 1), q.id, q.concept_id,
          baseline.rank(v, nullptr, no_profile), relevant);
      row("same_user", Configuration::proposed, same.id, std::to_string(i + 1), q.id, q.concept_id,
          proposed.rank(v, &p, opts), relevant);
      update_profile(p, v, clock++, ontology);
    }
  }

  // Several users over instants T1..Tn.
  for (const auto& u : config.users) {
    UserProfile p = fresh_profile(u);
    for (std::size_t t = 0; t < config.instants.size(); ++t) {
      const std::string& cid = config.instants[t];
      const auto relevant = relevant_for(corpus, ontology, ontology.index_of(cid));
      if (relevant.empty()) {
        throw Error(Errc::config, "instant concept '" + cid + "' has no relevant documents");
      }
      const ConceptVector v = vector_for(cid);
      const std::string instant = "T" + std::to_string(t + 1);
      row("instants", Configuration::baseline, u.id, instant, instant, cid,
          baseline.rank(v, nullptr, no_profile), relevant);
      row("instants", Configuration::proposed, u.id, instant, instant, cid, proposed.rank(v, &p, opts),
          relevant);
      update_profile(p, v, clock++, ontology);
    }
  }
  return report;
}

namespace {

std::string num(double v, int decimals = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "experiment,configuration,user,instant,query_id,concept,precision,recall,f1,retrieved,"
         "relevant,relevant_retrieved,precision_positive,recall_positive,f1_positive,"
         "retrieved_positive\n";
  for (const auto& r : report.rows) {
    out << r.experiment << ',' << configuration_name(r.configuration) << ',' << r.user << ','
        << r.instant << ',' << r.query_id << ',' << r.concept_id << ',' << num(r.metrics.precision, 6)
        << ',' << num(r.metrics.recall, 6) << ',' << num(r.metrics.f1, 6) << ','
        << r.metrics.retrieved << ',' << r.metrics.relevant << ',' << r.metrics.relevant_retrieved
        << ',' << num(r.positive.precision, 6) << ',' << num(r.positive.recall, 6) << ','
        << num(r.positive.f1, 6) << ',' << r.positive.retrieved << '\n';
  }
}

void write_report_table(std::ostream& out, const ExperimentReport& report) {
  out << "Corpus: " << report.documents << " documents, " << report.element_nodes
      << " element nodes, " << report.text_nodes << " text nodes (seed " << report.seed << ")\n\n";

  out << "Repeated requests of one user\n";
  out << pad("request", 26) << " | " << pad("baseline P    R    ret", 24) << " | "
      << "proposed P    R    ret\n";
  std::map<std::string, const ReportRow*> base_rows;
  for (const auto& r : report.rows) {
    if (r.experiment == "same_user" && r.configuration == Configuration::baseline) base_rows[r.query_id] = &r;
  }
  for (const auto& r : report.rows) {
    if (r.experiment != "same_user" || r.configuration != Configuration::proposed) continue;
    const ReportRow& b = *base_rows.at(r.query_id);
    const std::string label = r.query_id + " " + r.concept_id + " (" + std::to_string(r.metrics.relevant) + ")";
    out << pad(label, 26) << " | " << "         " << num(b.metrics.precision, 2) << " "
        << num(b.metrics.recall, 2) << " " << lpad(std::to_string(b.metrics.retrieved), 4) << " | "
        << "         " << num(r.metrics.precision, 2) << " " << num(r.metrics.recall, 2) << " "
        << lpad(std::to_string(r.metrics.retrieved), 4) << "\n";
  }
  const auto mb = report.mean("same_user", Configuration::baseline);
  const auto mp = report.mean("same_user", Configuration::proposed);
  out << "mean over " << mp.rows << " requests: baseline P=" << num(mb.precision, 3)
      << " R=" << num(mb.recall, 3) << "; proposed P=" << num(mp.precision, 3)
      << " R=" << num(mp.recall, 3) << "\n";
  const auto pb = report.mean("same_user", Configuration::baseline, true);
  const auto pp = report.mean("same_user", Configuration::proposed, true);
  out << "with every positive score retrieved: baseline P=" << num(pb.precision, 3)
      << " R=" << num(pb.recall, 3) << "; proposed P=" << num(pp.precision, 3)
      << " R=" << num(pp.recall, 3) << "\n";
  out << "published averages (five requests): baseline P=0.426 R=0.756; proposed P=0.710 R=0.978\n\n";

  std::vector<std::string> users;
  std::vector<std::string> instants;
  std::map<std::pair<std::string, std::string>, const ReportRow*> cells;
  for (const auto& r : report.rows) {
    if (r.experiment != "instants" || r.configuration != Configuration::proposed) continue;
    if (std::find(users.begin(), users.end(), r.user) == users.end()) users.push_back(r.user);
    if (std::find(instants.begin(), instants.end(), r.instant) == instants.end()) instants.push_back(r.instant);
    cells[{r.instant, r.user}] = &r;
  }
  if (users.empty()) return;
  out << "Instants, proposed configuration (R P F1 per user)\n";
  out << pad("instant", 28);
  for (const auto& u : users) out << " | " << pad(u, 16);
  out << "\n";
  for (const auto& t : instants) {
    out << pad(t + " " + cells.at({t, users.front()})->concept_id, 28);
    for (const auto& u : users) {
      const auto& m = cells.at({t, u})->metrics;
      out << " | " << num(m.recall, 2) << " " << num(m.precision, 2) << " " << num(m.f1, 4);
    }
    out << "\n";
  }
  const auto ib = report.mean("instants", Configuration::baseline);
  const auto ip = report.mean("instants", Configuration::proposed);
  out << "mean over " << ip.rows << " cells: proposed R=" << num(ip.recall, 3) << " P="
      << num(ip.precision, 3) << " F1=" << num(ip.f1, 3) << "; baseline R=" << num(ib.recall, 3)
      << " P=" << num(ib.precision, 3) << " F1=" << num(ib.f1, 3) << "\n";
  out << "published averages (proposed): R=0.864 P=0.716 F1=0.781\n";
}

}  // namespace xpir
