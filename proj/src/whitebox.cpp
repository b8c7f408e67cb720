#include "pevade/attack/whitebox.hpp"

#include <random>

#include "pevade/error.hpp"
#include "pevade/pe/pe.hpp"

namespace pevade {

int reconstruct_byte(const Eigen::VectorXd& current,
                     const Eigen::VectorXd& gradient,
                     const Eigen::MatrixXd& table, double step_size) {
  if (current.size() != table.cols() || gradient.size() != table.cols()) {
    raise(Errc::dimension_mismatch,
          "embedding/gradient width does not match the table");
  }
  const Eigen::VectorXd target = current - step_size * gradient;
  // Rows 0..255 only: the padding token is not a byte.
  const Eigen::VectorXd dist =
      (table.topRows(256).rowwise() - target.transpose())
          .rowwise()
          .squaredNorm();
  int best = 0;
  double best_d = dist(0);
  for (int b = 1; b < 256; ++b) {
    if (dist(b) < best_d) {
      best_d = dist(b);
      best = b;
    }
  }
  return best;
}

AttackTrace run_whitebox(const RawExe& sample, const ManipSpec& manip,
                         const Classifier& model, const WhiteboxConfig& cfg) {
  if (cfg.max_iterations < 1) {
    raise(Errc::config_error, "max_iterations must be at least 1");
  }
  const auto* diff = dynamic_cast<const DifferentiableClassifier*>(&model);
  if (!diff || !model.differentiable()) {
    raise(Errc::not_differentiable,
          "white-box attack needs embedding gradients");
  }

  const Patchable patch = apply_manipulation(sample.bytes, manip);
  const std::size_t window = diff->input_window();
  const std::vector<std::size_t> all_offsets = patch.editable_offsets();
  std::vector<std::size_t> in_window;
  std::vector<std::size_t> value_index;  // position of each offset in `values`
  for (std::size_t i = 0; i < all_offsets.size(); ++i) {
    if (all_offsets[i] < window) {
      in_window.push_back(all_offsets[i]);
      value_index.push_back(i);
    }
  }
  if (in_window.empty()) {
    raise(Errc::no_editable_bytes,
          "all " + std::to_string(all_offsets.size()) +
              " editable offsets fall outside the model window of " +
              std::to_string(window) + " bytes");
  }

  const Eigen::MatrixXd& table = diff->embedding_table();
  AttackTrace trace;
  trace.initial_score = model.score(sample.bytes);
  trace.initial_detected = trace.initial_score >= model.threshold();

  // Seeded random start for the controlled bytes. Zero-initialized filler is
  // invisible to the max pool (no argmax window, no gradient), so an all-zero
  // start would freeze gap-creating manipulations on the first iteration.
  Bytes values = patch.region_contents();
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t i = 0; i < in_window.size(); ++i) {
    values[value_index[i]] = static_cast<std::uint8_t>(rng());
  }
  Bytes current = apply_bytes(patch, values);

  double score = trace.initial_score;
  for (unsigned it = 1; it <= cfg.max_iterations; ++it) {
    const EmbeddingGradient grad = diff->embedding_gradient(current, in_window);
    for (std::size_t i = 0; i < in_window.size(); ++i) {
      // Normalize per position: a step of exactly step_size in embedding
      // space. The raw score gradient shrinks by p(1-p) near saturation and
      // would otherwise stop moving bytes at all.
      Eigen::VectorXd dir =
          grad.grads.row(static_cast<Eigen::Index>(i)).transpose();
      const double norm = dir.norm();
      if (norm > 0.0) dir /= norm;
      const int cur_byte = current[in_window[i]];
      const int next = reconstruct_byte(table.row(cur_byte).transpose(), dir,
                                        table, cfg.step_size);
      values[value_index[i]] = static_cast<std::uint8_t>(next);
    }
    current = apply_bytes(patch, values);
    score = model.score(current);
    trace.steps.push_back(
        {it, score, score >= model.threshold(), 0});
    if (cfg.stop_below_threshold && score < model.threshold()) break;
  }

  trace.final_bytes = std::move(current);
  trace.succeeded = score < model.threshold();
  return trace;
}

}  // namespace pevade
