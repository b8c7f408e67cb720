#include "pevade/model/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pevade/error.hpp"

namespace pevade {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Variance-reduction split over the given rows. Deterministic: features are
// scanned in ascending order and only strictly better gains replace the
// incumbent, so ties resolve to the lowest feature / lowest threshold.
SplitChoice best_split(const std::vector<Eigen::VectorXd>& x,
                       const std::vector<double>& r,
                       const std::vector<int>& rows, int min_leaf) {
  SplitChoice best;
  const int n = static_cast<int>(rows.size());
  if (n < 2 * min_leaf) return best;

  double total = 0.0;
  for (int i : rows) total += r[static_cast<std::size_t>(i)];
  const double base_score = total * total / n;

  const int dim = static_cast<int>(x[0].size());
  std::vector<std::pair<double, double>> vals(static_cast<std::size_t>(n));
  for (int feat = 0; feat < dim; ++feat) {
    for (int i = 0; i < n; ++i) {
      const int row = rows[static_cast<std::size_t>(i)];
      vals[static_cast<std::size_t>(i)] = {x[static_cast<std::size_t>(row)](feat),
                                           r[static_cast<std::size_t>(row)]};
    }
    std::sort(vals.begin(), vals.end());
    double left_sum = 0.0;
    for (int i = 0; i < n - 1; ++i) {
      left_sum += vals[static_cast<std::size_t>(i)].second;
      if (vals[static_cast<std::size_t>(i)].first ==
          vals[static_cast<std::size_t>(i + 1)].first) {
        continue;  // cannot split between equal values
      }
      const int nl = i + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double right_sum = total - left_sum;
      const double gain =
          left_sum * left_sum / nl + right_sum * right_sum / nr - base_score;
      if (gain > best.gain + 1e-12) {
        best.found = true;
        best.feature = feat;
        best.threshold = 0.5 * (vals[static_cast<std::size_t>(i)].first +
                                vals[static_cast<std::size_t>(i + 1)].first);
        best.gain = gain;
      }
    }
  }
  return best;
}

int grow(RegressionTree& tree, const std::vector<Eigen::VectorXd>& x,
         const std::vector<double>& r, std::vector<int> rows, int depth,
         const GbdtHyperparams& hp) {
  double mean = 0.0;
  for (int i : rows) mean += r[static_cast<std::size_t>(i)];
  mean /= static_cast<double>(rows.size());

  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (depth >= hp.max_depth) {
    tree.nodes[static_cast<std::size_t>(idx)].value = hp.learning_rate * mean;
    return idx;
  }
  const SplitChoice split = best_split(x, r, rows, hp.min_samples_leaf);
  if (!split.found) {
    tree.nodes[static_cast<std::size_t>(idx)].value = hp.learning_rate * mean;
    return idx;
  }
  std::vector<int> left, right;
  for (int i : rows) {
    (x[static_cast<std::size_t>(i)](split.feature) <= split.threshold ? left
                                                                      : right)
        .push_back(i);
  }
  tree.nodes[static_cast<std::size_t>(idx)].feature = split.feature;
  tree.nodes[static_cast<std::size_t>(idx)].threshold = split.threshold;
  const int l = grow(tree, x, r, std::move(left), depth + 1, hp);
  const int rgt = grow(tree, x, r, std::move(right), depth + 1, hp);
  tree.nodes[static_cast<std::size_t>(idx)].left = l;
  tree.nodes[static_cast<std::size_t>(idx)].right = rgt;
  return idx;
}

}  // namespace

double RegressionTree::predict(const Eigen::VectorXd& x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

double tree_logit(const TreeModel& model, const Eigen::VectorXd& features) {
  double logit = 0.0;
  for (const auto& t : model.trees) logit += t.predict(features);
  return logit;
}

double tree_score(const TreeModel& model, const Bytes& bytes) {
  return sigmoid(tree_logit(model, extract_features(bytes)));
}

TreeModel train_trees(const std::vector<RawExe>& dataset,
                      const GbdtHyperparams& hp, std::uint64_t /*seed*/,
                      TrainReport* report) {
  bool any_benign = false, any_malicious = false;
  for (const auto& s : dataset) {
    (s.label == Label::benign ? any_benign : any_malicious) = true;
  }
  if (!any_benign || !any_malicious) {
    raise(Errc::degenerate_dataset, "training set must contain both classes");
  }

  const int n = static_cast<int>(dataset.size());
  std::vector<Eigen::VectorXd> x;
  std::vector<double> y;
  x.reserve(dataset.size());
  for (const auto& s : dataset) {
    x.push_back(extract_features(s.bytes));
    y.push_back(s.label == Label::malicious ? 1.0 : 0.0);
  }

  TreeModel model;
  model.hp = hp;
  std::vector<double> logits(static_cast<std::size_t>(n), 0.0);
  std::vector<int> all_rows(static_cast<std::size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), 0);

  for (int k = 0; k < hp.num_trees; ++k) {
    std::vector<double> residual(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      residual[static_cast<std::size_t>(i)] =
          y[static_cast<std::size_t>(i)] -
          sigmoid(logits[static_cast<std::size_t>(i)]);
    }
    RegressionTree tree;
    grow(tree, x, residual, all_rows, 0, hp);
    for (int i = 0; i < n; ++i) {
      logits[static_cast<std::size_t>(i)] +=
          tree.predict(x[static_cast<std::size_t>(i)]);
    }
    model.trees.push_back(std::move(tree));
  }

  if (report) {
    std::size_t correct = 0;
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = sigmoid(logits[static_cast<std::size_t>(i)]);
      const double yi = y[static_cast<std::size_t>(i)];
      correct += ((p >= 0.5) == (yi > 0.5)) ? 1u : 0u;
      const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
      loss += -(yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc));
    }
    report->final_accuracy = static_cast<double>(correct) / n;
    report->final_loss = loss / n;
    report->epochs_run = hp.num_trees;
  }
  return model;
}

}  // namespace pevade
