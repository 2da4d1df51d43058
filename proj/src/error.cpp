#include "pgmsc/error.hpp"

#include <exception>

namespace pgmsc {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::schema_mismatch: return "schema-mismatch";
    case Errc::parse: return "parse";
    case Errc::empty_dataset: return "empty-dataset";
    case Errc::invalid_split: return "invalid-split";
    case Errc::io: return "io";
    case Errc::infeasible_k: return "infeasible-k";
    case Errc::cycle: return "cycle";
    case Errc::zero_evidence: return "zero-evidence";
    case Errc::infeasible_retention: return "infeasible-retention";
    case Errc::degenerate_power: return "degenerate-power";
    case Errc::unsupported_length: return "unsupported-length";
    case Errc::divergence: return "divergence";
    case Errc::version_mismatch: return "version-mismatch";
    case Errc::corrupt: return "corrupt";
  }
  return "unknown";
}

void rethrow_with_stage(const std::string& stage) {
  try {
    throw;
  } catch (const Error& e) {
    throw Error(e.code(), stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::invalid_argument, stage + ": " + e.what());
  }
}

}  // namespace pgmsc
