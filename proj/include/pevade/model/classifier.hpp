#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pevade/bytes.hpp"
#include "pevade/error.hpp"

namespace pevade {

/// Rows align with `positions`: row i is d(score)/d(embedding vector used at
/// positions[i]).
struct EmbeddingGradient {
  std::vector<std::size_t> positions;
  Eigen::MatrixXd grads;
};

/// Scoring interface every attack targets: bytes -> maliciousness in [0,1].
/// A sample is labeled malicious iff score >= threshold.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual double score(const Bytes& bytes) const = 0;
  virtual bool differentiable() const noexcept = 0;
  virtual std::string kind() const = 0;

  double threshold() const noexcept { return threshold_; }
  void set_threshold(double t) {
    if (!(t > 0.0 && t < 1.0)) {
      raise(Errc::config_error, "threshold must lie strictly inside (0,1)");
    }
    threshold_ = t;
  }
  bool detects(const Bytes& bytes) const { return score(bytes) >= threshold_; }

 private:
  double threshold_ = 0.5;
};

struct TrainReport {
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  int epochs_run = 0;
};

/// Extension for models that expose gradients w.r.t. a byte-embedding layer.
class DifferentiableClassifier : public Classifier {
 public:
  bool differentiable() const noexcept override { return true; }

  /// Embedding rows 0..255 are byte values; row 256 is the padding token.
  virtual const Eigen::MatrixXd& embedding_table() const = 0;

  /// Number of leading input bytes the model actually reads.
  virtual std::size_t input_window() const = 0;

  virtual EmbeddingGradient embedding_gradient(
      const Bytes& bytes, const std::vector<std::size_t>& positions) const = 0;
};

}  // namespace pevade
