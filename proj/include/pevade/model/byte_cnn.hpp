#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pevade/model/classifier.hpp"
#include "pevade/sample.hpp"

namespace pevade {

/// Desk-scale gated byte-convolution network. The architecture follows the
/// classic byte-level detector: embed -> two parallel 1-D convolutions ->
/// sigmoid-gated product -> global temporal max pool -> dense -> sigmoid.
struct CnnHyperparams {
  int embedding_dim = 8;     // d
  int kernel_width = 32;     // w
  int channels = 64;         // c per convolution
  int max_input_len = 4096;  // n; longer inputs are truncated
  int stride = 32;
  // training
  int epochs = 40;
  int batch_size = 16;
  double learning_rate = 0.08;
  double early_stop_accuracy = 0.995;
};

inline constexpr int kPaddingToken = 256;  // only used to right-pad short inputs

struct ByteCnnModel {
  CnnHyperparams hp;
  Eigen::MatrixXd embedding;  // 257 x d
  Eigen::MatrixXd conv_a;     // c x (w*d)
  Eigen::VectorXd bias_a;     // c
  Eigen::MatrixXd conv_b;     // c x (w*d)
  Eigen::VectorXd bias_b;     // c
  Eigen::VectorXd dense_w;    // c
  double dense_b = 0.0;

  int num_windows() const {
    return (hp.max_input_len - hp.kernel_width) / hp.stride + 1;
  }
};

/// Forward pass; deterministic for a fixed model and input.
double cnn_score(const ByteCnnModel& model, const Bytes& bytes);

/// Analytic d(score)/d(embedding vector) at the given positions, routed
/// through the max-pool subgradient (argmax ties broken toward the lowest
/// window index). Positions must lie in [0, max_input_len).
EmbeddingGradient cnn_grad(const ByteCnnModel& model, const Bytes& bytes,
                           const std::vector<std::size_t>& positions);

/// Random parameter draw; shared by training init and the test suites.
ByteCnnModel make_random_cnn(const CnnHyperparams& hp, std::uint64_t seed);

/// Minibatch gradient descent on binary cross-entropy; bit-deterministic for
/// a fixed dataset, hyperparams and seed. Requires both labels present.
ByteCnnModel train_cnn(const std::vector<RawExe>& dataset,
                       const CnnHyperparams& hp, std::uint64_t seed,
                       TrainReport* report = nullptr);

class ByteCnnClassifier : public DifferentiableClassifier {
 public:
  explicit ByteCnnClassifier(ByteCnnModel model) : model_(std::move(model)) {}

  double score(const Bytes& bytes) const override {
    return cnn_score(model_, bytes);
  }
  std::string kind() const override { return "byte-cnn"; }
  const Eigen::MatrixXd& embedding_table() const override {
    return model_.embedding;
  }
  std::size_t input_window() const override {
    return static_cast<std::size_t>(model_.hp.max_input_len);
  }
  EmbeddingGradient embedding_gradient(
      const Bytes& bytes,
      const std::vector<std::size_t>& positions) const override {
    return cnn_grad(model_, bytes, positions);
  }
  const ByteCnnModel& model() const { return model_; }

 private:
  ByteCnnModel model_;
};

}  // namespace pevade
