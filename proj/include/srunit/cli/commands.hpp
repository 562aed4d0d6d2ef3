#pragma once

#include <string>
#include <vector>

namespace srunit {

/// Process exit code for an error category ("argument", "io", ...); 1 if unknown.
int exit_code_for(const std::string& category);

/// Entry point of the srunit command line; returns the process exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace srunit
