#pragma once

#include <stdexcept>
#include <string>

namespace elicit {

enum class ErrorKind {
  Domain,          // invalid probabilities, dimensions, empty groups
  Identification,  // model not identified for the requested configuration
  Decomposition,   // complex eigenvalues in the MRT decomposition
  NearDegenerate,  // eigen gap below tolerance
  Estimation,      // optimizer failure, out-of-range closed form
  Inference,       // too many failed bootstrap replicates
  Design,          // infeasible Monte Carlo design
  Load,            // malformed input file
  Config,          // bad CLI / config values
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace elicit
