#pragma once

#include <ostream>
#include <string>

#include "netchoice/config.hpp"

namespace netchoice::cli {

/// Subcommands: simulate, train, cv, gridsearch, posterior, infer.
inline constexpr const char* kCommands[] = {"simulate", "train", "cv", "gridsearch", "posterior", "infer"};

/// Runs one subcommand with a resolved configuration, writing artifacts
/// under cfg.out. Throws netchoice::Error on failure.
void run_command(const std::string& command, const RunConfig& cfg, std::ostream& out);

/// Full command line entry point. Returns the process exit status; errors
/// are reported on `err`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace netchoice::cli
