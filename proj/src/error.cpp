#include "error.hpp"

namespace elicit {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Identification: return "identification";
    case ErrorKind::Decomposition: return "decomposition";
    case ErrorKind::NearDegenerate: return "near-degenerate";
    case ErrorKind::Estimation: return "estimation";
    case ErrorKind::Inference: return "inference";
    case ErrorKind::Design: return "design";
    case ErrorKind::Load: return "load";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace elicit
