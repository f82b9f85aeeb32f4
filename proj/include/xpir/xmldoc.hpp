#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xpir {

using DocId = std::uint32_t;

enum class NodeType : std::uint8_t { element = 1, attribute = 2, text = 3 };

std::string_view node_type_name(NodeType type) noexcept;

/// One XML node as an interval tuple (start, end, parent, type, name, value).
///
/// start/end come from a single counter shared by open, close and text
/// events, so u is an ancestor of v exactly when u's interval strictly
/// contains v's. parent is the parent's start, 0 for the document element.
/// Text nodes carry no name; element nodes carry no value.
struct NodeDescriptor {
  DocId doc = 0;
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  std::uint32_t parent = 0;
  NodeType type = NodeType::element;
  std::string name;
  std::string value;

  bool has_name() const noexcept { return type != NodeType::text; }
  bool has_value() const noexcept { return type != NodeType::element; }

  bool operator==(const NodeDescriptor&) const = default;
};

class DocumentTree {
 public:
  DocumentTree() = default;
  // Descriptors must be sorted by start and satisfy the tree invariants;
  // throws Error{validation} otherwise.
  DocumentTree(DocId doc, std::string name, std::vector<NodeDescriptor> descriptors);

  DocId doc() const noexcept { return doc_; }
  const std::string& name() const noexcept { return name_; }
  std::span<const NodeDescriptor> descriptors() const noexcept { return nodes_; }
  const NodeDescriptor& root() const { return nodes_.front(); }

  // nullptr when no node has that start value.
  const NodeDescriptor* find(std::uint32_t start) const noexcept;
  std::vector<const NodeDescriptor*> by_name(std::string_view name) const;

  // Half-open index range [first, last) of nodes strictly inside `node`.
  std::pair<std::size_t, std::size_t> subtree_range(const NodeDescriptor& node) const;

  bool operator==(const DocumentTree& other) const {
    return doc_ == other.doc_ && name_ == other.name_ && nodes_ == other.nodes_;
  }

 private:
  DocId doc_ = 0;
  std::string name_;
  std::vector<NodeDescriptor> nodes_;
  std::vector<std::uint32_t> by_name_;  // node indices ordered by (name, start)
};

struct ParseOptions {
  bool keep_whitespace_text = false;
};

/// Stream-parses one UTF-8 XML document in a single pass.
///
/// Throws Error{parse} with the byte offset for malformed input or a
/// declared encoding other than UTF-8/US-ASCII.
DocumentTree parse_document(DocId doc, std::string name, std::istream& source,
                            const ParseOptions& options = {});
DocumentTree parse_document(DocId doc, std::string name, std::string_view xml,
                            const ParseOptions& options = {});

// Structural predicates. Throw Error{cross_document} for nodes of two docs.
bool is_ancestor(const NodeDescriptor& u, const NodeDescriptor& v);
bool precedes(const NodeDescriptor& u, const NodeDescriptor& v);

// Text descriptors strictly inside `element`, in document order.
std::vector<const NodeDescriptor*> descendant_text_nodes(const NodeDescriptor& element,
                                                         const DocumentTree& tree);

// Parent-link hops from `text` up to `element` (direct child -> 1).
// Throws Error{not_ancestor}.
std::uint32_t arc_distance(const NodeDescriptor& element, const NodeDescriptor& text,
                           const DocumentTree& tree);

}  // namespace xpir
