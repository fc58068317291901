#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cbrnn::cli {

/// Entry point of the `cbrnn` tool. Returns the process exit code:
/// 0 on success, 1 on any failure, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cbrnn::cli
