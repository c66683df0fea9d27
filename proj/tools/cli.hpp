#pragma once

#include "qhawkes/kernels.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qhawkes::cli {

// Resolved configuration of one run: preset keys, then the config file, then
// command-line key=value overrides.
struct RunConfig {
    std::string command;
    KeyValues keys;
    std::string out_dir{"out"};
    std::vector<std::uint64_t> seeds;
    bool seed_generated{false};
    unsigned threads{1};
};

struct Artifact {
    std::string name;
    std::string sha256;
    std::size_t bytes{0};
};

[[nodiscard]] std::string sha256_hex(const std::string& data);

// Parses argv and runs the subcommand. Exit codes: 0 success, 2 config or
// domain error, 3 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace qhawkes::cli
