#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace seqembed {

struct GradcheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_error < tolerance; }
};

struct GradcheckOptions {
  std::size_t instances = 20;
  std::uint64_t seed = 7;
  double eps = 1e-5;
  double tolerance = 1e-4;
  // The end-to-end encoder checks perturb table entries with this step.
  double encoder_eps = 1e-4;
  // Instance rows are shared + spread * noise (both uniform in [-1, 1]).
  double spread = 0.6;
};

// Finite-difference verification of every loss on random instances
// (batch 2..6, width 4..16): MNRL with and without negatives, CoSENT, the
// Matryoshka wrapper around each, and encoder + loss end to end.
std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckOptions& options = {});

}  // namespace seqembed
