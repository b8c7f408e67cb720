#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "pevade/model/classifier.hpp"
#include "pevade/model/features.hpp"
#include "pevade/sample.hpp"

namespace pevade {

struct TreeNode {
  int feature = -1;  // < 0 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(const Eigen::VectorXd& x) const;
};

struct GbdtHyperparams {
  int num_trees = 60;
  int max_depth = 3;
  double learning_rate = 0.2;
  int min_samples_leaf = 2;
};

/// Boosted regression trees over the static feature vector. Leaf values carry
/// the learning rate, so the prediction is sigmoid of the plain tree sum.
struct TreeModel {
  GbdtHyperparams hp;
  int feature_dim = kFeatureDim;
  std::vector<RegressionTree> trees;
};

double tree_logit(const TreeModel& model, const Eigen::VectorXd& features);
double tree_score(const TreeModel& model, const Bytes& bytes);

/// Gradient boosting with squared-loss residual fits on the logit scale.
/// Deterministic for a fixed dataset, hyperparams and seed.
TreeModel train_trees(const std::vector<RawExe>& dataset,
                      const GbdtHyperparams& hp, std::uint64_t seed,
                      TrainReport* report = nullptr);

class GbdtClassifier : public Classifier {
 public:
  explicit GbdtClassifier(TreeModel model) : model_(std::move(model)) {}

  double score(const Bytes& bytes) const override {
    return tree_score(model_, bytes);
  }
  bool differentiable() const noexcept override { return false; }
  std::string kind() const override { return "gbdt"; }
  const TreeModel& model() const { return model_; }

 private:
  TreeModel model_;
};

}  // namespace pevade
