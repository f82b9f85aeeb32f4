#include "xpir/error.hpp"

namespace xpir {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::parse: return "parse error";
    case Errc::validation: return "validation error";
    case Errc::degenerate_ontology: return "degenerate ontology";
    case Errc::invalid_weighting: return "invalid weighting";
    case Errc::unknown_concept: return "unknown concept";
    case Errc::unknown_relation: return "unknown relation";
    case Errc::cross_document: return "cross-document comparison";
    case Errc::not_ancestor: return "not an ancestor";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::internal_consistency: return "internal consistency error";
    case Errc::stale_profile: return "stale profile";
    case Errc::stale_index: return "stale index";
    case Errc::checksum: return "checksum error";
    case Errc::io: return "I/O error";
    case Errc::not_found: return "not found";
    case Errc::duplicate: return "duplicate";
    case Errc::contention: return "contention";
    case Errc::empty_query: return "empty query";
    case Errc::config: return "configuration error";
  }
  return "error";
}

}  // namespace xpir
