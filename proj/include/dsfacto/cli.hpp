#pragma once

#include <string>
#include <vector>

namespace dsfacto::cli {

// Command-line driver: `train`, `bench` and `synth` subcommands.
// Exit codes: 0 success, 1 runtime failure, 2 configuration/usage error.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace dsfacto::cli
