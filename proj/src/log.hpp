#pragma once

#include <iostream>
#include <sstream>
#include <string>

namespace seqembed::log {

// SEQEMBED_VERBOSITY = quiet | info | debug (default info).
int verbosity();

template <typename... Args>
void info(const Args&... args) {
  if (verbosity() < 1) return;
  std::ostringstream line;
  (line << ... << args);
  std::clog << "[seqembed] " << line.str() << '\n';
}

template <typename... Args>
void debug(const Args&... args) {
  if (verbosity() < 2) return;
  std::ostringstream line;
  (line << ... << args);
  std::clog << "[seqembed:debug] " << line.str() << '\n';
}

}  // namespace seqembed::log
