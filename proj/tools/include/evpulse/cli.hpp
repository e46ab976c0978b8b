#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "evpulse/errors.hpp"

namespace evpulse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// A stage ran before the artifact it reads was produced.
class DependencyError : public Error {
 public:
  DependencyError(const std::string& artifact, const std::string& command)
      : Error("missing " + artifact + "; run `evpulse " + command + "` first") {}
};

/// Runs one `evpulse` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace evpulse::cli
