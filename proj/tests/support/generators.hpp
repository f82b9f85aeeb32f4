#pragma once

// Seeded generators shared by the unit and acceptance suites.

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xpir/ontology.hpp"

namespace xpir::testing {

inline std::string data_path(const std::string& rel) {
  return std::string(XPIR_DATA_DIR) + "/" + rel;
}

// Random DAG of concepts. Concept i may only take parents among 0..i-1, so
// the result is acyclic. A root-to-leaf chain of length >= 3 is forced so
// the depth weighting never degenerates.
inline std::vector<Concept> random_concepts(std::mt19937_64& rng, std::size_t max_concepts = 200) {
  std::uniform_int_distribution<std::size_t> size_dist(3, max_concepts);
  const std::size_t n = size_dist(rng);
  std::vector<Concept> out;
  std::bernoulli_distribution new_root(0.05);
  std::uniform_int_distribution<int> parent_count(1, 3);
  for (std::size_t i = 0; i < n; ++i) {
    Concept c;
    c.id = "c" + std::to_string(i);
    c.label = "Concept " + std::to_string(i);
    c.keywords = {"kw" + std::to_string(i)};
    if (i == 1 || i == 2) {
      c.parents = {"c" + std::to_string(i - 1)};
    } else if (i > 2 && !new_root(rng)) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      const int k = parent_count(rng);
      for (int j = 0; j < k; ++j) {
        std::string p = "c" + std::to_string(pick(rng));
        if (std::find(c.parents.begin(), c.parents.end(), p) == c.parents.end()) {
          c.parents.push_back(std::move(p));
        }
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

// Plain in-memory XML tree used as the numbering oracle's input.
struct XmlNode {
  enum Kind { element_node, text_node } kind = element_node;
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;
  std::vector<XmlNode> children;
};

inline XmlNode random_xml_tree(std::mt19937_64& rng, std::size_t max_nodes = 200) {
  std::uniform_int_distribution<std::size_t> budget_dist(1, max_nodes);
  std::size_t budget = budget_dist(rng) - 1;
  const std::vector<std::string> names = {"doc", "sec", "title", "para", "item", "list", "b"};
  const std::vector<std::string> words = {"index", "tree", "query", "node", "stack", "a&b", "x<y"};
  std::uniform_int_distribution<std::size_t> name_pick(0, names.size() - 1);
  std::uniform_int_distribution<std::size_t> word_pick(0, words.size() - 1);
  std::uniform_int_distribution<int> attr_count(0, 2);
  std::bernoulli_distribution is_text(0.35);

  auto make_element = [&]() {
    XmlNode n;
    n.name = names[name_pick(rng)];
    const int attrs = attr_count(rng);
    for (int a = 0; a < attrs; ++a) {
      n.attributes.emplace_back("a" + std::to_string(a), words[word_pick(rng)]);
    }
    return n;
  };

  XmlNode root = make_element();
  std::vector<XmlNode*> open;
  auto collect_open = [&]() {
    // Pointers into children vectors go stale on push_back; recollect.
    open.clear();
    std::vector<XmlNode*> stack{&root};
    while (!stack.empty()) {
      XmlNode* cur = stack.back();
      stack.pop_back();
      open.push_back(cur);
      for (auto& ch : cur->children) {
        if (ch.kind == XmlNode::element_node) stack.push_back(&ch);
      }
    }
  };
  collect_open();
  while (budget > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
    XmlNode* parent = open[pick(rng)];
    --budget;
    if (is_text(rng)) {
      // Adjacent text runs would merge; keep texts separated by elements.
      if (!parent->children.empty() && parent->children.back().kind == XmlNode::text_node) continue;
      XmlNode t;
      t.kind = XmlNode::text_node;
      t.text = words[word_pick(rng)] + " " + words[word_pick(rng)];
      parent->children.push_back(std::move(t));
    } else {
      parent->children.push_back(make_element());
    }
    collect_open();
  }
  return root;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline void serialize(const XmlNode& n, std::string& out) {
  if (n.kind == XmlNode::text_node) {
    out += escape(n.text);
    return;
  }
  out += "<" + n.name;
  for (const auto& [k, v] : n.attributes) out += " " + k + "=\"" + escape(v) + "\"";
  if (n.children.empty()) {
    out += "/>";
    return;
  }
  out += ">";
  for (const auto& ch : n.children) serialize(ch, out);
  out += "</" + n.name + ">";
}

inline std::string serialize(const XmlNode& root) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  serialize(root, out);
  return out;
}

// Two-pass oracle: the tree is already fully built; number it by recursion.
struct OracleRow {
  std::uint32_t start, end, parent;
  int type;  // 1 element, 2 attribute, 3 text
  std::string name, value;
};

inline void oracle_number(const XmlNode& n, std::uint32_t parent, std::uint32_t& counter,
                          std::vector<OracleRow>& rows) {
  const std::size_t slot = rows.size();
  if (n.kind == XmlNode::text_node) {
    const std::uint32_t s = ++counter;
    const std::uint32_t e = ++counter;
    rows.push_back({s, e, parent, 3, "", n.text});
    return;
  }
  const std::uint32_t s = ++counter;
  rows.push_back({s, 0, parent, 1, n.name, ""});
  for (const auto& [k, v] : n.attributes) {
    const std::uint32_t as = ++counter;
    const std::uint32_t ae = ++counter;
    rows.push_back({as, ae, s, 2, k, v});
  }
  for (const auto& ch : n.children) oracle_number(ch, s, counter, rows);
  rows[slot].end = ++counter;
}

inline std::vector<OracleRow> oracle_number(const XmlNode& root) {
  std::vector<OracleRow> rows;
  std::uint32_t counter = 0;
  oracle_number(root, 0, counter, rows);
  return rows;
}

}  // namespace xpir::testing
