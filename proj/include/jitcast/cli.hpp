#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jitcast::io {

/// Runs one subcommand. args[0] is the program name. Returns 0 on success,
/// 1 on a runtime error and 2 on a usage error. `env_seed` plays the role of
/// JITCAST_SEED (nullptr when unset).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const char* env_seed = nullptr);

/// Process entry point: std::cout, std::cerr and the real environment.
int run_cli(int argc, char** argv);

}  // namespace jitcast::io
