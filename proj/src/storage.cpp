#include "xpir/storage.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>
#include <zlib.h>

#include "xpir/error.hpp"

namespace xpir {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kIndexMagic = "XPIR1";
constexpr std::string_view kProfileMagic = "XPRF1";
constexpr std::uint8_t kVersion = 1;

std::uint32_t crc(std::string_view bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  while (!bytes.empty()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size(), 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), n);
    bytes.remove_prefix(n);
  }
  return static_cast<std::uint32_t>(c);
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) {
    if (!std::isfinite(v)) throw Error(Errc::validation, "cannot store a non-finite weight");
    u64(std::bit_cast<std::uint64_t>(v));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }

  void vec(const ConceptVector& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& [c, w] : v.entries()) {
      u32(c);
      f64(w);
    }
  }
  void counts(const ConceptCounts& cc) {
    u32(static_cast<std::uint32_t>(cc.size()));
    for (const auto& [c, n] : cc) {
      u32(c);
      u32(n);
    }
  }

  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(Errc::checksum, "corrupt data: " + what);
}

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const double v = std::bit_cast<double>(u64());
    if (!std::isfinite(v)) corrupt("non-finite weight");
    return v;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return std::string(raw(u32())); }

  // Element counts are bounded by the remaining bytes so a corrupt length
  // cannot trigger a huge allocation.
  std::uint32_t count(std::size_t min_row_bytes) {
    const std::uint32_t n = u32();
    if (min_row_bytes > 0 && n > remaining() / min_row_bytes) corrupt("row count out of range");
    return n;
  }

  ConceptVector vec(std::size_t dim) {
    const std::uint32_t n = count(12);
    std::vector<ConceptVector::Entry> e;
    e.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t c = u32();
      const double w = f64();
      if (c >= dim || w == 0.0 || (!e.empty() && e.back().first >= c)) corrupt("concept vector");
      e.emplace_back(c, w);
    }
    return ConceptVector::from_entries(std::move(e));
  }
  ConceptCounts counts(std::size_t dim) {
    const std::uint32_t n = count(8);
    ConceptCounts cc;
    cc.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::uint32_t c = u32();
      const std::uint32_t k = u32();
      if (c >= dim || (!cc.empty() && cc.back().first >= c)) corrupt("concept counts");
      cc.emplace_back(c, k);
    }
    return cc;
  }

  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) corrupt("unexpected end of data");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

const std::array<std::string_view, 8> kSections = {"HEAD", "STAT", "DOCS", "ELEM",
                                                   "ATTR", "TEXT", "TVEC", "EVEC"};

void put_section(Writer& file, std::string_view tag, Writer& payload) {
  file.raw(tag);
  file.u64(payload.bytes().size());
  file.raw(payload.bytes());
  file.u32(crc(payload.bytes()));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open '" + path + "': " + std::strerror(errno));
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(Errc::io, "cannot read '" + path + "'");
  return buf.str();
}

void write_atomically(const std::string& path, std::string_view bytes) {
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) {
    throw Error(Errc::io, "cannot write '" + path + "': " + std::strerror(errno));
  }
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw Error(Errc::io, "cannot write '" + path + "': " + std::strerror(err));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    const int err = errno;
    ::unlink(tmp.c_str());
    throw Error(Errc::io, "cannot flush '" + path + "': " + std::strerror(err));
  }
  if (std::rename(tmp.c_str(), target.c_str()) != 0) {
    const int err = errno;
    ::unlink(tmp.c_str());
    throw Error(Errc::io, "cannot rename into '" + path + "': " + std::strerror(err));
  }
}

}  // namespace

DescriptorTables to_tables(std::span<const DocumentTree> documents) {
  DescriptorTables t;
  for (const auto& tree : documents) {
    t.documents.push_back({tree.doc(), tree.name()});
    for (const auto& n : tree.descriptors()) {
      switch (n.type) {
        case NodeType::element:
          t.elements.push_back({n.doc, n.start, n.name, n.end, n.parent});
          break;
        case NodeType::attribute:
          t.attributes.push_back({n.doc, n.start, n.end, n.parent, n.name, n.value});
          break;
        case NodeType::text:
          t.texts.push_back({n.doc, n.start, n.value, n.end, n.parent});
          break;
      }
    }
  }
  return t;
}

std::vector<DocumentTree> from_tables(const DescriptorTables& tables) {
  std::map<DocId, std::vector<NodeDescriptor>> nodes;
  for (std::size_t i = 0; i < tables.documents.size(); ++i) {
    if (tables.documents[i].idf_doc != i + 1) {
      throw Error(Errc::validation, "document ids must run 1..N in order");
    }
    nodes[tables.documents[i].idf_doc];
  }
  auto bucket = [&](DocId doc) -> std::vector<NodeDescriptor>& {
    auto it = nodes.find(doc);
    if (it == nodes.end()) {
      throw Error(Errc::validation, "row refers to unknown document " + std::to_string(doc));
    }
    return it->second;
  };
  for (const auto& r : tables.elements) {
    bucket(r.idf_doc).push_back({r.idf_doc, r.begin, r.end, r.parent, NodeType::element, r.ele_name, {}});
  }
  for (const auto& r : tables.attributes) {
    bucket(r.idf_doc).push_back(
        {r.idf_doc, r.begin, r.end, r.parent, NodeType::attribute, r.att_name, r.value_att});
  }
  for (const auto& r : tables.texts) {
    bucket(r.idf_doc).push_back({r.idf_doc, r.begin, r.end, r.parent, NodeType::text, {}, r.value});
  }
  std::vector<DocumentTree> out;
  for (const auto& d : tables.documents) {
    auto& v = nodes[d.idf_doc];
    std::sort(v.begin(), v.end(),
              [](const NodeDescriptor& a, const NodeDescriptor& b) { return a.start < b.start; });
    out.emplace_back(d.idf_doc, d.doc_name, std::move(v));
  }
  return out;
}

std::string serialize_index(const IndexStore& index) {
  Writer file;
  file.raw(kIndexMagic);
  file.u8(kVersion);
  file.u32(static_cast<std::uint32_t>(kSections.size()));

  Writer head;
  head.str(index.header.ontology_fingerprint);
  head.str(index.header.log_base);
  head.u8(static_cast<std::uint8_t>(index.header.weighting));
  head.u8(index.header.attribute_text ? 1 : 0);
  head.i64(index.header.build_timestamp);
  head.u64(index.header.total_text_nodes);
  put_section(file, "HEAD", head);

  Writer stat;
  stat.u64(index.stats.total_text_nodes);
  stat.u32(static_cast<std::uint32_t>(index.stats.text_nodes_containing.size()));
  for (auto n : index.stats.text_nodes_containing) stat.u32(n);
  put_section(file, "STAT", stat);

  const DescriptorTables t = to_tables(index.documents);
  Writer docs;
  docs.u32(static_cast<std::uint32_t>(t.documents.size()));
  for (const auto& r : t.documents) {
    docs.u32(r.idf_doc);
    docs.str(r.doc_name);
  }
  put_section(file, "DOCS", docs);

  Writer elem;
  elem.u32(static_cast<std::uint32_t>(t.elements.size()));
  for (const auto& r : t.elements) {
    elem.u32(r.idf_doc);
    elem.u32(r.begin);
    elem.str(r.ele_name);
    elem.u32(r.end);
    elem.u32(r.parent);
  }
  put_section(file, "ELEM", elem);

  Writer attr;
  attr.u32(static_cast<std::uint32_t>(t.attributes.size()));
  for (const auto& r : t.attributes) {
    attr.u32(r.idf_doc);
    attr.u32(r.begin);
    attr.u32(r.end);
    attr.u32(r.parent);
    attr.str(r.att_name);
    attr.str(r.value_att);
  }
  put_section(file, "ATTR", attr);

  Writer text;
  text.u32(static_cast<std::uint32_t>(t.texts.size()));
  for (const auto& r : t.texts) {
    text.u32(r.idf_doc);
    text.u32(r.begin);
    text.str(r.value);
    text.u32(r.end);
    text.u32(r.parent);
  }
  put_section(file, "TEXT", text);

  Writer tvec;
  tvec.u32(static_cast<std::uint32_t>(index.texts.size()));
  for (const auto& e : index.texts) {
    tvec.u32(e.doc);
    tvec.u32(e.start);
    tvec.counts(e.counts);
    tvec.vec(e.vector);
  }
  put_section(file, "TVEC", tvec);

  Writer evec;
  evec.u32(static_cast<std::uint32_t>(index.elements.size()));
  for (const auto& e : index.elements) {
    evec.u32(e.doc);
    evec.u32(e.start);
    evec.u32(e.coverage.text_nodes);
    evec.counts(e.coverage.containing);
    evec.vec(e.base);
  }
  put_section(file, "EVEC", evec);

  file.u32(crc(file.bytes()));
  return std::move(file.bytes());
}

IndexStore deserialize_index(std::string_view bytes, const Ontology& ontology) {
  if (bytes.size() < kIndexMagic.size() + 1 + 4 + 4 || bytes.substr(0, kIndexMagic.size()) != kIndexMagic) {
    corrupt("not an index file (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader trailer(bytes.substr(bytes.size() - 4));
  if (trailer.u32() != crc(body)) corrupt("file checksum mismatch");

  Reader file(body);
  file.raw(kIndexMagic.size());
  if (file.u8() != kVersion) corrupt("unsupported index version");
  if (file.u32() != kSections.size()) corrupt("unexpected section count");
  std::map<std::string, std::string_view> sections;
  for (auto tag : kSections) {
    if (file.raw(4) != tag) corrupt("expected section " + std::string(tag));
    const std::uint64_t len = file.u64();
    if (len > file.remaining()) corrupt("section " + std::string(tag) + " truncated");
    const auto payload = file.raw(static_cast<std::size_t>(len));
    if (file.u32() != crc(payload)) corrupt("section " + std::string(tag) + " checksum mismatch");
    sections[std::string(tag)] = payload;
  }
  if (!file.done()) corrupt("trailing bytes");

  IndexStore index;
  Reader head(sections["HEAD"]);
  index.header.ontology_fingerprint = head.str();
  index.header.log_base = head.str();
  const std::uint8_t scheme = head.u8();
  if (scheme != 1 && scheme != 2) corrupt("weighting scheme");
  index.header.weighting = static_cast<WeightingScheme>(scheme);
  index.header.attribute_text = head.u8() != 0;
  index.header.build_timestamp = head.i64();
  index.header.total_text_nodes = head.u64();
  if (!head.done()) corrupt("HEAD section length");
  if (index.header.ontology_fingerprint != ontology.fingerprint()) {
    throw Error(Errc::stale_index, "index was built for ontology " +
                                       index.header.ontology_fingerprint + ", loaded ontology is " +
                                       ontology.fingerprint());
  }
  const std::size_t dim = ontology.size();

  Reader stat(sections["STAT"]);
  index.stats.total_text_nodes = stat.u64();
  const std::uint32_t nstat = stat.count(4);
  if (nstat != dim) corrupt("statistics dimension");
  index.stats.text_nodes_containing.resize(nstat);
  for (auto& n : index.stats.text_nodes_containing) n = stat.u32();
  if (!stat.done()) corrupt("STAT section length");

  DescriptorTables t;
  Reader docs(sections["DOCS"]);
  for (std::uint32_t n = docs.count(8); n > 0; --n) {
    DocumentRow r;
    r.idf_doc = docs.u32();
    r.doc_name = docs.str();
    t.documents.push_back(std::move(r));
  }
  Reader elem(sections["ELEM"]);
  for (std::uint32_t n = elem.count(20); n > 0; --n) {
    ElementRow r;
    r.idf_doc = elem.u32();
    r.begin = elem.u32();
    r.ele_name = elem.str();
    r.end = elem.u32();
    r.parent = elem.u32();
    t.elements.push_back(std::move(r));
  }
  Reader attr(sections["ATTR"]);
  for (std::uint32_t n = attr.count(24); n > 0; --n) {
    AttributeRow r;
    r.idf_doc = attr.u32();
    r.begin = attr.u32();
    r.end = attr.u32();
    r.parent = attr.u32();
    r.att_name = attr.str();
    r.value_att = attr.str();
    t.attributes.push_back(std::move(r));
  }
  Reader text(sections["TEXT"]);
  for (std::uint32_t n = text.count(20); n > 0; --n) {
    TextRow r;
    r.idf_doc = text.u32();
    r.begin = text.u32();
    r.value = text.str();
    r.end = text.u32();
    r.parent = text.u32();
    t.texts.push_back(std::move(r));
  }
  if (!docs.done() || !elem.done() || !attr.done() || !text.done()) corrupt("descriptor sections");
  try {
    index.documents = from_tables(t);
  } catch (const Error& e) {
    corrupt(e.what());
  }

  Reader tvec(sections["TVEC"]);
  for (std::uint32_t n = tvec.count(16); n > 0; --n) {
    TextEntry e;
    e.doc = tvec.u32();
    e.start = tvec.u32();
    e.counts = tvec.counts(dim);
    e.vector = tvec.vec(dim);
    index.texts.push_back(std::move(e));
  }
  Reader evec(sections["EVEC"]);
  for (std::uint32_t n = evec.count(20); n > 0; --n) {
    ElementEntry e;
    e.doc = evec.u32();
    e.start = evec.u32();
    e.coverage.text_nodes = evec.u32();
    e.coverage.containing = evec.counts(dim);
    e.base = evec.vec(dim);
    index.elements.push_back(std::move(e));
  }
  if (!tvec.done() || !evec.done()) corrupt("vector sections");

  // Cross-checks: entries point at real nodes of the right kind, in order,
  // and the statistics equal a recount from the stored counts.
  auto check_entries = [&](const auto& entries, auto accepts) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (i > 0 && std::pair(entries[i - 1].doc, entries[i - 1].start) >= std::pair(e.doc, e.start)) {
        corrupt("entries out of order");
      }
      if (e.doc == 0 || e.doc > index.documents.size()) corrupt("entry document id");
      const NodeDescriptor* n = index.documents[e.doc - 1].find(e.start);
      if (n == nullptr || !accepts(*n)) corrupt("entry without matching node");
    }
  };
  check_entries(index.texts, [&](const NodeDescriptor& n) {
    return n.type == NodeType::text ||
           (index.header.attribute_text && n.type == NodeType::attribute);
  });
  check_entries(index.elements, [](const NodeDescriptor& n) { return n.type == NodeType::element; });
  std::vector<ConceptCounts> counts;
  counts.reserve(index.texts.size());
  for (const auto& e : index.texts) counts.push_back(e.counts);
  if (counts.empty() || compute_stats(counts, dim) != index.stats ||
      index.header.total_text_nodes != index.stats.total_text_nodes) {
    throw Error(Errc::stale_index, "stored statistics do not match the text-vector table");
  }
  return index;
}

void save_index(const IndexStore& index, const std::string& path) {
  write_atomically(path, serialize_index(index));
}

IndexStore load_index(const std::string& path, const Ontology& ontology) {
  return deserialize_index(read_file(path), ontology);
}

std::string serialize_profile(const UserProfile& profile) {
  Writer w;
  w.raw(kProfileMagic);
  w.u8(kVersion);
  w.str(profile.user_id);
  w.str(profile.ontology_fingerprint);
  w.u32(static_cast<std::uint32_t>(profile.interests.size()));
  for (double v : profile.interests) w.f64(v);
  w.u32(static_cast<std::uint32_t>(profile.history.size()));
  for (const auto& r : profile.history) {
    w.i64(r.timestamp);
    w.vec(r.query);
  }
  w.u32(crc(w.bytes()));
  return std::move(w.bytes());
}

UserProfile deserialize_profile(std::string_view bytes) {
  if (bytes.size() < kProfileMagic.size() + 5 || bytes.substr(0, kProfileMagic.size()) != kProfileMagic) {
    corrupt("not a profile file (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  if (Reader(bytes.substr(bytes.size() - 4)).u32() != crc(body)) corrupt("profile checksum mismatch");
  Reader r(body);
  r.raw(kProfileMagic.size());
  if (r.u8() != kVersion) corrupt("unsupported profile version");
  UserProfile p;
  p.user_id = r.str();
  p.ontology_fingerprint = r.str();
  const std::uint32_t dim = r.count(8);
  p.interests.resize(dim);
  for (auto& v : p.interests) v = r.f64();
  for (std::uint32_t n = r.count(12); n > 0; --n) {
    QueryRecord q;
    q.timestamp = r.i64();
    q.query = r.vec(dim);
    p.history.push_back(std::move(q));
  }
  if (!r.done()) corrupt("profile length");
  return p;
}

ProfileStore::ProfileStore(std::string directory) : dir_(std::move(directory)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw Error(Errc::io, "cannot use profile directory '" + dir_ + "'");
  }
}

bool ProfileStore::valid_user_id(std::string_view id) {
  if (id.empty() || id.size() > 64 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

std::string ProfileStore::path_of(std::string_view user_id, std::string_view ext) const {
  if (!valid_user_id(user_id)) {
    throw Error(Errc::invalid_argument, "invalid user id '" + std::string(user_id) + "'");
  }
  return (fs::path(dir_) / (std::string(user_id) + std::string(ext))).string();
}

bool ProfileStore::exists(std::string_view user_id) const {
  return fs::exists(path_of(user_id, ".prof"));
}

std::vector<std::string> ProfileStore::users() const {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".prof") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ProfileStore::Lock::~Lock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

ProfileStore::Lock ProfileStore::acquire(std::string_view user_id, Wait wait) const {
  const std::string path = path_of(user_id, ".lock");
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(Errc::io, "cannot open lock '" + path + "': " + std::strerror(errno));
  const int op = wait == Wait::yes ? LOCK_EX : (LOCK_EX | LOCK_NB);
  int rc;
  do {
    rc = ::flock(fd, op);
  } while (rc != 0 && errno == EINTR);
  if (rc != 0) {
    const int err = errno;
    ::close(fd);
    if (err == EWOULDBLOCK) {
      throw Error(Errc::contention, "profile of '" + std::string(user_id) + "' is being written");
    }
    throw Error(Errc::io, "cannot lock '" + path + "': " + std::strerror(err));
  }
  return Lock(fd);
}

void ProfileStore::write(const UserProfile& profile) const {
  write_atomically(path_of(profile.user_id, ".prof"), serialize_profile(profile));
}

void ProfileStore::create(const UserProfile& profile) {
  Lock lock = acquire(profile.user_id, Wait::no);
  if (exists(profile.user_id)) {
    throw Error(Errc::duplicate, "user '" + profile.user_id + "' already exists");
  }
  write(profile);
}

void ProfileStore::save(const UserProfile& profile) {
  Lock lock = acquire(profile.user_id, Wait::no);
  if (!exists(profile.user_id)) {
    throw Error(Errc::not_found, "unknown user '" + profile.user_id + "'");
  }
  write(profile);
}

UserProfile ProfileStore::load(std::string_view user_id, const Ontology& ontology) const {
  const std::string path = path_of(user_id, ".prof");
  if (!fs::exists(path)) throw Error(Errc::not_found, "unknown user '" + std::string(user_id) + "'");
  UserProfile p = deserialize_profile(read_file(path));
  if (p.user_id != user_id) corrupt("profile file holds another user");
  check_fingerprint(p, ontology);
  return p;
}

}  // namespace xpir
