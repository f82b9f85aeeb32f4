#include "xpir/xmldoc.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <memory>
#include <sstream>

#include <expat.h>

#include "xpir/error.hpp"

namespace xpir {

std::string_view node_type_name(NodeType type) noexcept {
  switch (type) {
    case NodeType::element: return "element";
    case NodeType::attribute: return "attribute";
    case NodeType::text: return "text";
  }
  return "unknown";
}

DocumentTree::DocumentTree(DocId doc, std::string name, std::vector<NodeDescriptor> descriptors)
    : doc_(doc), name_(std::move(name)), nodes_(std::move(descriptors)) {
  auto bad = [&](const NodeDescriptor& n, const std::string& what) {
    throw Error(Errc::validation, "document '" + name_ + "' node " + std::to_string(n.start) +
                                      ": " + what);
  };
  if (nodes_.empty()) throw Error(Errc::validation, "document '" + name_ + "' has no nodes");

  std::vector<const NodeDescriptor*> open;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const NodeDescriptor& n = nodes_[i];
    if (n.doc != doc_) bad(n, "belongs to another document");
    if (n.start == 0 || n.start >= n.end) bad(n, "start must be positive and below end");
    if (i > 0 && nodes_[i - 1].start >= n.start) bad(n, "descriptors not ordered by start");
    if (n.type == NodeType::text && !n.name.empty()) bad(n, "text node with a name");
    if (n.type == NodeType::element && !n.value.empty()) bad(n, "element node with a value");
    while (!open.empty() && open.back()->end < n.start) open.pop_back();
    if (open.empty()) {
      if (i != 0) bad(n, "second top-level node");
      if (n.parent != 0) bad(n, "root must have parent 0");
      if (n.type != NodeType::element) bad(n, "root must be an element");
    } else {
      const NodeDescriptor& top = *open.back();
      if (n.end >= top.end) bad(n, "interval overlaps its parent");
      if (top.type != NodeType::element) bad(n, "only elements can have children");
      if (n.parent != top.start) bad(n, "parent does not match enclosing element");
    }
    open.push_back(&n);
  }

  by_name_.reserve(nodes_.size());
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].has_name()) by_name_.push_back(i);
  }
  std::stable_sort(by_name_.begin(), by_name_.end(), [&](std::uint32_t a, std::uint32_t b) {
    return nodes_[a].name < nodes_[b].name;
  });
}

const NodeDescriptor* DocumentTree::find(std::uint32_t start) const noexcept {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), start,
                             [](const NodeDescriptor& n, std::uint32_t s) { return n.start < s; });
  return (it != nodes_.end() && it->start == start) ? &*it : nullptr;
}

std::vector<const NodeDescriptor*> DocumentTree::by_name(std::string_view name) const {
  auto lo = std::lower_bound(by_name_.begin(), by_name_.end(), name,
                             [&](std::uint32_t i, std::string_view n) { return nodes_[i].name < n; });
  std::vector<const NodeDescriptor*> out;
  for (; lo != by_name_.end() && nodes_[*lo].name == name; ++lo) out.push_back(&nodes_[*lo]);
  return out;
}

std::pair<std::size_t, std::size_t> DocumentTree::subtree_range(const NodeDescriptor& node) const {
  auto by_start = [](const NodeDescriptor& n, std::uint32_t s) { return n.start < s; };
  auto first = std::upper_bound(nodes_.begin(), nodes_.end(), node.start,
                                [](std::uint32_t s, const NodeDescriptor& n) { return s < n.start; });
  auto last = std::lower_bound(first, nodes_.end(), node.end, by_start);
  return {static_cast<std::size_t>(first - nodes_.begin()),
          static_cast<std::size_t>(last - nodes_.begin())};
}

namespace {

bool whitespace_only(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// SAX state: one counter numbers open, close and text events; the stack
// holds indices of elements whose end is not yet known.
struct Numbering {
  DocId doc;
  ParseOptions options;
  XML_Parser parser = nullptr;
  std::uint32_t counter = 0;
  std::vector<std::size_t> open;
  std::vector<NodeDescriptor> nodes;
  std::string pending_text;
  std::string failure;

  std::uint32_t parent_start() const { return open.empty() ? 0 : nodes[open.back()].start; }

  void flush_text() {
    if (pending_text.empty()) return;
    if (options.keep_whitespace_text || !whitespace_only(pending_text)) {
      NodeDescriptor t;
      t.doc = doc;
      t.type = NodeType::text;
      t.parent = parent_start();
      t.start = ++counter;
      t.end = ++counter;
      t.value = std::move(pending_text);
      nodes.push_back(std::move(t));
    }
    pending_text.clear();
  }

  void fail(std::string message) {
    if (failure.empty()) failure = std::move(message);
    XML_StopParser(parser, XML_FALSE);
  }

  static void on_start(void* self_ptr, const XML_Char* name, const XML_Char** attrs) {
    auto& self = *static_cast<Numbering*>(self_ptr);
    self.flush_text();
    NodeDescriptor e;
    e.doc = self.doc;
    e.type = NodeType::element;
    e.parent = self.parent_start();
    e.start = ++self.counter;
    e.name = name;
    self.nodes.push_back(std::move(e));
    const std::uint32_t owner = self.nodes.back().start;
    self.open.push_back(self.nodes.size() - 1);
    for (const XML_Char** a = attrs; a && *a; a += 2) {
      NodeDescriptor at;
      at.doc = self.doc;
      at.type = NodeType::attribute;
      at.parent = owner;
      at.start = ++self.counter;
      at.end = ++self.counter;
      at.name = a[0];
      at.value = a[1];
      self.nodes.push_back(std::move(at));
    }
  }

  static void on_end(void* self_ptr, const XML_Char*) {
    auto& self = *static_cast<Numbering*>(self_ptr);
    self.flush_text();
    self.nodes[self.open.back()].end = ++self.counter;
    self.open.pop_back();
  }

  static void on_text(void* self_ptr, const XML_Char* s, int len) {
    static_cast<Numbering*>(self_ptr)->pending_text.append(s, static_cast<std::size_t>(len));
  }

  static void on_decl(void* self_ptr, const XML_Char*, const XML_Char* encoding, int) {
    auto& self = *static_cast<Numbering*>(self_ptr);
    if (encoding == nullptr) return;
    const std::string enc = lower(encoding);
    if (enc != "utf-8" && enc != "utf8" && enc != "us-ascii") {
      self.fail("unsupported encoding '" + std::string(encoding) + "' (only UTF-8 is accepted)");
    }
  }
};

struct ParserDeleter {
  void operator()(XML_ParserStruct* p) const { XML_ParserFree(p); }
};

}  // namespace

DocumentTree parse_document(DocId doc, std::string name, std::istream& source,
                            const ParseOptions& options) {
  std::unique_ptr<XML_ParserStruct, ParserDeleter> parser(XML_ParserCreate("UTF-8"));
  if (!parser) throw Error(Errc::internal_consistency, "cannot allocate XML parser");

  Numbering state;
  state.doc = doc;
  state.options = options;
  state.parser = parser.get();
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), &Numbering::on_start, &Numbering::on_end);
  XML_SetCharacterDataHandler(parser.get(), &Numbering::on_text);
  XML_SetXmlDeclHandler(parser.get(), &Numbering::on_decl);

  auto raise = [&]() {
    const auto offset = XML_GetCurrentByteIndex(parser.get());
    const std::string reason =
        state.failure.empty() ? XML_ErrorString(XML_GetErrorCode(parser.get())) : state.failure;
    throw Error(Errc::parse, "document '" + name + "': " + reason + " at byte " +
                                 std::to_string(offset));
  };

  std::array<char, 1 << 16> buffer;
  while (true) {
    source.read(buffer.data(), buffer.size());
    const auto got = static_cast<int>(source.gcount());
    const bool last = got < static_cast<int>(buffer.size());
    if (XML_Parse(parser.get(), buffer.data(), got, last) == XML_STATUS_ERROR) raise();
    if (last) break;
  }
  if (state.nodes.empty()) {
    throw Error(Errc::parse, "document '" + name + "': no root element");
  }
  return DocumentTree(doc, std::move(name), std::move(state.nodes));
}

DocumentTree parse_document(DocId doc, std::string name, std::string_view xml,
                            const ParseOptions& options) {
  std::istringstream in{std::string(xml)};
  return parse_document(doc, std::move(name), in, options);
}

namespace {

void same_document(const NodeDescriptor& u, const NodeDescriptor& v) {
  if (u.doc != v.doc) {
    throw Error(Errc::cross_document, "nodes belong to documents " + std::to_string(u.doc) +
                                          " and " + std::to_string(v.doc));
  }
}

}  // namespace

bool is_ancestor(const NodeDescriptor& u, const NodeDescriptor& v) {
  same_document(u, v);
  return u.start < v.start && v.end < u.end;
}

bool precedes(const NodeDescriptor& u, const NodeDescriptor& v) {
  same_document(u, v);
  return u.end < v.start;
}

std::vector<const NodeDescriptor*> descendant_text_nodes(const NodeDescriptor& element,
                                                         const DocumentTree& tree) {
  if (element.type != NodeType::element) {
    throw Error(Errc::invalid_argument, "descendant_text_nodes needs an element node");
  }
  same_document(element, tree.root());
  const auto [first, last] = tree.subtree_range(element);
  std::vector<const NodeDescriptor*> out;
  const auto nodes = tree.descriptors();
  for (std::size_t i = first; i < last; ++i) {
    if (nodes[i].type == NodeType::text) out.push_back(&nodes[i]);
  }
  return out;
}

std::uint32_t arc_distance(const NodeDescriptor& element, const NodeDescriptor& text,
                           const DocumentTree& tree) {
  if (!is_ancestor(element, text)) {
    throw Error(Errc::not_ancestor, "node " + std::to_string(element.start) +
                                        " is not an ancestor of node " +
                                        std::to_string(text.start));
  }
  std::uint32_t hops = 0;
  const NodeDescriptor* cur = &text;
  while (cur->start != element.start) {
    cur = tree.find(cur->parent);
    if (cur == nullptr) throw Error(Errc::internal_consistency, "broken parent chain");
    ++hops;
  }
  return hops;
}

}  // namespace xpir
