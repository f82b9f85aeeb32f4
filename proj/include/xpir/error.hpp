#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xpir {

enum class Errc {
  parse,
  validation,
  degenerate_ontology,
  invalid_weighting,
  unknown_concept,
  unknown_relation,
  cross_document,
  not_ancestor,
  invalid_argument,
  internal_consistency,
  stale_profile,
  stale_index,
  checksum,
  io,
  not_found,
  duplicate,
  contention,
  empty_query,
  config,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace xpir
