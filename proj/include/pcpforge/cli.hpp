#pragma once

#include <string>

namespace pcpforge {

// Entry point of the pcp-forge binary; returns the process exit code.
int run_cli(int argc, char** argv);

std::string sha256_file(const std::string& path);

}  // namespace pcpforge
