#pragma once

#include "json.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace lamewave::cli {

// Exit codes.
constexpr int kOk = 0;
constexpr int kValidation = 2;
constexpr int kSolver = 3;

// Runs one subcommand. `args` excludes the program name. Results go to `out`
// (and files under the configured output directory); failures produce one
// line of JSON on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

// Resolved configuration of a subcommand: defaults, then the config file,
// then flags. Throws InputError on unknown keys or bad values.
nlohmann::json resolve_config(const std::string& subcommand, const nlohmann::json& file,
                              const nlohmann::json& flags);
// Parameter names and defaults of a subcommand.
nlohmann::json default_config(const std::string& subcommand);

}  // namespace lamewave::cli
