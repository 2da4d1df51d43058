#ifndef PGMSC_ERROR_HPP_
#define PGMSC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pgmsc {

enum class Errc {
  invalid_argument,
  schema_mismatch,
  parse,
  empty_dataset,
  invalid_split,
  io,
  infeasible_k,
  cycle,
  zero_evidence,
  infeasible_retention,
  degenerate_power,
  unsupported_length,
  divergence,
  version_mismatch,
  corrupt,
};

const char* errc_name(Errc code) noexcept;

// All library failures are reported through this type; `code()` lets callers
// (and the CLI exit-code mapping) branch on the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Wraps an error raised by a pipeline stage, prefixing the stage label.
[[noreturn]] void rethrow_with_stage(const std::string& stage);

}  // namespace pgmsc

#endif  // PGMSC_ERROR_HPP_
