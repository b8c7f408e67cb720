#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "pevade/attack/trace.hpp"
#include "pevade/manip/manipulations.hpp"
#include "pevade/model/classifier.hpp"
#include "pevade/sample.hpp"

namespace pevade {

struct WhiteboxConfig {
  unsigned max_iterations = 50;
  double step_size = 1.0;  // embedding-space step length per position
  bool stop_below_threshold = false;
  std::uint64_t seed = 0;  // drives the initial fill of the editable bytes
};

/// Descends one step in embedding space (target = current - step * gradient)
/// and snaps back to the byte whose embedding row is nearest in squared
/// Euclidean distance. The padding token is never returned; ties break to the
/// smallest byte value.
int reconstruct_byte(const Eigen::VectorXd& current,
                     const Eigen::VectorXd& gradient,
                     const Eigen::MatrixXd& table, double step_size);

/// Gradient attack loop. The editable bytes inside the model window start
/// from a seeded random fill; each iteration then runs one reconstruction
/// sweep over all of them (per-position gradient direction, normalized to
/// step_size) and re-scores. The trace's effort-0 entry is the untouched
/// sample. Editable offsets beyond the window keep their current bytes; if
/// none fall inside, Error(no_editable_bytes).
AttackTrace run_whitebox(const RawExe& sample, const ManipSpec& manip,
                         const Classifier& model, const WhiteboxConfig& cfg);

}  // namespace pevade
