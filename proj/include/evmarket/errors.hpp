#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace evmarket {

// Error taxonomy surfaced by the CLI as machine-parsable codes.
enum class errc {
  validation,     // scenario / parameter invariant violated
  numeric_range,  // overflow or non-finite intermediate
  solver,         // root bracketing / polishing failed
  domain,         // argument outside an operation's domain
  degeneracy,     // IFT denominator H <= 0 (outside the asymptotic range)
  argument,       // malformed call (sizes, counts, guards)
  io,             // file system
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::validation: return "validation";
    case errc::numeric_range: return "numeric_range";
    case errc::solver: return "solver";
    case errc::domain: return "domain";
    case errc::degeneracy: return "degeneracy";
    case errc::argument: return "argument";
    case errc::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace evmarket
