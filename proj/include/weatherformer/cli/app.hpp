#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace wf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Returns 0 on
/// success, 1 on a runtime failure and 2 on a usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

/// Seed of an independent stream derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace wf::cli
