#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace seqembed {

// Entry point of the seqembed tool. args[0] is the program name.
// Returns 0 on success, 2 on usage errors, 1 on any other failure; failures
// print one "error: kind=<kind> message=<text>" line to err.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace seqembed
