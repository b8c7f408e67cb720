#pragma once

#include <cstdint>
#include <vector>

#include "pevade/bytes.hpp"

namespace pevade {

/// One optimizer step: effort is the iteration count (white-box) or the
/// cumulative classifier query count (black-box).
struct TraceStep {
  std::uint64_t effort = 0;
  double score = 0.0;
  bool detected = false;
  std::uint64_t injected_bytes = 0;
};

/// Per-attack record. Steps have strictly increasing effort; the entry at
/// effort 0 (the unattacked sample) is kept separately so detection rates
/// can be sampled at any budget including zero.
struct AttackTrace {
  double initial_score = 0.0;
  bool initial_detected = false;
  std::vector<TraceStep> steps;
  Bytes final_bytes;
  bool succeeded = false;

  double score_at(std::uint64_t effort) const {
    double s = initial_score;
    for (const auto& st : steps) {
      if (st.effort > effort) break;
      s = st.score;
    }
    return s;
  }

  bool detected_at(std::uint64_t effort) const {
    bool d = initial_detected;
    for (const auto& st : steps) {
      if (st.effort > effort) break;
      d = st.detected;
    }
    return d;
  }
};

}  // namespace pevade
