#include "log.hpp"

#include <cstdlib>
#include <string_view>

namespace seqembed::log {

int verbosity() {
  static const int level = [] {
    const char* env = std::getenv("SEQEMBED_VERBOSITY");
    if (env == nullptr) return 1;
    const std::string_view v(env);
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
  }();
  return level;
}

}  // namespace seqembed::log
