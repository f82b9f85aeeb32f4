#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xpir/concept_index.hpp"
#include "xpir/profile.hpp"

namespace xpir {

struct DocumentRow {
  DocId idf_doc = 0;
  std::string doc_name;
  bool operator==(const DocumentRow&) const = default;
};

struct ElementRow {
  DocId idf_doc = 0;
  std::uint32_t begin = 0;
  std::string ele_name;
  std::uint32_t end = 0;
  std::uint32_t parent = 0;
  bool operator==(const ElementRow&) const = default;
};

struct AttributeRow {
  DocId idf_doc = 0;
  std::uint32_t begin = 0;
  std::uint32_t end = 0;
  std::uint32_t parent = 0;
  std::string att_name;
  std::string value_att;
  bool operator==(const AttributeRow&) const = default;
};

struct TextRow {
  DocId idf_doc = 0;
  std::uint32_t begin = 0;
  std::string value;
  std::uint32_t end = 0;
  std::uint32_t parent = 0;
  bool operator==(const TextRow&) const = default;
};

/// Node descriptors split into the four relational tables, rows ordered by
/// (idf_doc, begin).
struct DescriptorTables {
  std::vector<DocumentRow> documents;
  std::vector<ElementRow> elements;
  std::vector<AttributeRow> attributes;
  std::vector<TextRow> texts;
  bool operator==(const DescriptorTables&) const = default;
};

DescriptorTables to_tables(std::span<const DocumentTree> documents);
// Reassembles trees, validating every invariant. Documents must be numbered
// 1..N. Throws Error{validation}.
std::vector<DocumentTree> from_tables(const DescriptorTables& tables);

/// Index file layout (all integers little-endian):
///   "XPIR1" u8 version, u32 section count
///   per section: 4-byte tag, u64 payload length, payload, u32 CRC-32 of payload
///   trailer: u32 CRC-32 of every preceding byte
/// Sections, in order: HEAD, STAT, DOCS, ELEM, ATTR, TEXT, TVEC, EVEC.
/// Doubles are stored as their IEEE-754 bit pattern.
std::string serialize_index(const IndexStore& index);

/// Throws Error{checksum} for any corruption or truncation and
/// Error{stale_index} when the ontology fingerprint differs.
IndexStore deserialize_index(std::string_view bytes, const Ontology& ontology);

// Atomic: writes a temporary file next to `path`, then renames it.
void save_index(const IndexStore& index, const std::string& path);
IndexStore load_index(const std::string& path, const Ontology& ontology);

std::string serialize_profile(const UserProfile& profile);
UserProfile deserialize_profile(std::string_view bytes);

/// Directory of per-user profile files. Writes hold an exclusive per-user
/// lock (flock on "<user>.lock"), so concurrent writers of one user are
/// serialized or rejected, never interleaved. Reads take no lock; files are
/// replaced by rename, so readers see a complete old or new profile.
class ProfileStore {
 public:
  enum class Wait { no, yes };

  explicit ProfileStore(std::string directory);

  const std::string& directory() const noexcept { return dir_; }
  bool exists(std::string_view user_id) const;
  std::vector<std::string> users() const;

  // Throws Error{duplicate} if the user already has a profile.
  void create(const UserProfile& profile);
  // Throws Error{not_found}; Error{stale_profile} for another ontology.
  UserProfile load(std::string_view user_id, const Ontology& ontology) const;
  // Replaces an existing profile. Error{contention} if another writer holds
  // the user's lock.
  void save(const UserProfile& profile);

  /// Load-modify-save under the user's lock. With Wait::no a held lock
  /// raises Error{contention}; with Wait::yes the call blocks.
  template <class Fn>
  UserProfile modify(std::string_view user_id, const Ontology& ontology, Fn&& fn,
                     Wait wait = Wait::yes) {
    Lock lock = acquire(user_id, wait);
    UserProfile p = load(user_id, ontology);
    fn(p);
    write(p);
    return p;
  }

  // Valid ids: 1-64 characters of [A-Za-z0-9_.-], not starting with '.'.
  static bool valid_user_id(std::string_view user_id);

 private:
  class Lock {
   public:
    explicit Lock(int fd) : fd_(fd) {}
    Lock(Lock&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Lock(const Lock&) = delete;
    Lock& operator=(const Lock&) = delete;
    Lock& operator=(Lock&&) = delete;
    ~Lock();

   private:
    int fd_;
  };

  Lock acquire(std::string_view user_id, Wait wait) const;
  void write(const UserProfile& profile) const;
  std::string path_of(std::string_view user_id, std::string_view ext) const;

  std::string dir_;
};

}  // namespace xpir
