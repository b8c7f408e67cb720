#include "pevade/model/byte_cnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pevade/error.hpp"

namespace pevade {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<int> tokenize(const Bytes& bytes, int n) {
  std::vector<int> tokens(static_cast<std::size_t>(n));
  const std::size_t used = std::min<std::size_t>(bytes.size(), n);
  for (std::size_t i = 0; i < used; ++i) tokens[i] = bytes[i];
  for (std::size_t i = used; i < tokens.size(); ++i) tokens[i] = kPaddingToken;
  return tokens;
}

struct Forward {
  std::vector<int> tokens;
  Eigen::MatrixXd windows;  // m x (w*d), flattened position-major
  Eigen::MatrixXd pre_a;    // m x c
  Eigen::MatrixXd pre_b;    // m x c
  Eigen::VectorXd pooled;   // c
  std::vector<int> argmax;  // c, lowest window index on ties
  double logit = 0.0;
  double prob = 0.0;
};

Forward run_forward(const ByteCnnModel& model, const Bytes& bytes) {
  const auto& hp = model.hp;
  const int d = hp.embedding_dim;
  const int w = hp.kernel_width;
  const int m = model.num_windows();

  Forward f;
  f.tokens = tokenize(bytes, hp.max_input_len);
  f.windows.resize(m, w * d);
  for (int t = 0; t < m; ++t) {
    const int base = t * hp.stride;
    for (int k = 0; k < w; ++k) {
      f.windows.block(t, k * d, 1, d) = model.embedding.row(f.tokens[base + k]);
    }
  }
  f.pre_a = (f.windows * model.conv_a.transpose()).rowwise() +
            model.bias_a.transpose();
  f.pre_b = (f.windows * model.conv_b.transpose()).rowwise() +
            model.bias_b.transpose();

  const int c = hp.channels;
  f.pooled.resize(c);
  f.argmax.assign(c, 0);
  for (int j = 0; j < c; ++j) {
    double best = -std::numeric_limits<double>::infinity();
    int best_t = 0;
    for (int t = 0; t < m; ++t) {
      const double g = f.pre_a(t, j) * sigmoid(f.pre_b(t, j));
      if (g > best) {  // strict: ties keep the lowest index
        best = g;
        best_t = t;
      }
    }
    f.pooled(j) = best;
    f.argmax[j] = best_t;
  }
  f.logit = model.dense_w.dot(f.pooled) + model.dense_b;
  f.prob = sigmoid(f.logit);
  return f;
}

/// d(logit)/d(embedded position vector) for all positions, via the argmax
/// windows only. Returns an n x d matrix.
Eigen::MatrixXd input_grad_from(const ByteCnnModel& model, const Forward& f,
                                double dlogit) {
  const auto& hp = model.hp;
  const int d = hp.embedding_dim;
  const int w = hp.kernel_width;
  Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(hp.max_input_len, d);
  for (int j = 0; j < hp.channels; ++j) {
    const int t = f.argmax[j];
    const double a = f.pre_a(t, j);
    const double sb = sigmoid(f.pre_b(t, j));
    const double da = dlogit * model.dense_w(j) * sb;
    const double db = dlogit * model.dense_w(j) * a * sb * (1.0 - sb);
    const Eigen::RowVectorXd dwin =
        da * model.conv_a.row(j) + db * model.conv_b.row(j);
    const int base = t * hp.stride;
    for (int k = 0; k < w; ++k) {
      dx.row(base + k) += dwin.segment(k * d, d);
    }
  }
  return dx;
}

struct ParamGrads {
  Eigen::MatrixXd embedding, conv_a, conv_b;
  Eigen::VectorXd bias_a, bias_b, dense_w;
  double dense_b = 0.0;

  explicit ParamGrads(const ByteCnnModel& m)
      : embedding(Eigen::MatrixXd::Zero(m.embedding.rows(), m.embedding.cols())),
        conv_a(Eigen::MatrixXd::Zero(m.conv_a.rows(), m.conv_a.cols())),
        conv_b(Eigen::MatrixXd::Zero(m.conv_b.rows(), m.conv_b.cols())),
        bias_a(Eigen::VectorXd::Zero(m.bias_a.size())),
        bias_b(Eigen::VectorXd::Zero(m.bias_b.size())),
        dense_w(Eigen::VectorXd::Zero(m.dense_w.size())) {}
};

void accumulate_grads(const ByteCnnModel& model, const Forward& f,
                      double dlogit, ParamGrads& g) {
  const auto& hp = model.hp;
  const int d = hp.embedding_dim;
  const int w = hp.kernel_width;
  g.dense_w += dlogit * f.pooled;
  g.dense_b += dlogit;
  for (int j = 0; j < hp.channels; ++j) {
    const int t = f.argmax[j];
    const double a = f.pre_a(t, j);
    const double sb = sigmoid(f.pre_b(t, j));
    const double da = dlogit * model.dense_w(j) * sb;
    const double db = dlogit * model.dense_w(j) * a * sb * (1.0 - sb);
    g.conv_a.row(j) += da * f.windows.row(t);
    g.bias_a(j) += da;
    g.conv_b.row(j) += db * f.windows.row(t);
    g.bias_b(j) += db;
    const Eigen::RowVectorXd dwin =
        da * model.conv_a.row(j) + db * model.conv_b.row(j);
    const int base = t * hp.stride;
    for (int k = 0; k < w; ++k) {
      g.embedding.row(f.tokens[base + k]) += dwin.segment(k * d, d);
    }
  }
}

}  // namespace

double cnn_score(const ByteCnnModel& model, const Bytes& bytes) {
  return run_forward(model, bytes).prob;
}

EmbeddingGradient cnn_grad(const ByteCnnModel& model, const Bytes& bytes,
                           const std::vector<std::size_t>& positions) {
  const auto n = static_cast<std::size_t>(model.hp.max_input_len);
  for (auto p : positions) {
    if (p >= n) {
      raise(Errc::position_out_of_range,
            "position " + std::to_string(p) + " outside the model window of " +
                std::to_string(n));
    }
  }
  const Forward f = run_forward(model, bytes);
  const double dlogit = f.prob * (1.0 - f.prob);  // d(score)/d(logit)
  const Eigen::MatrixXd dx = input_grad_from(model, f, dlogit);

  EmbeddingGradient out;
  out.positions = positions;
  out.grads.resize(static_cast<Eigen::Index>(positions.size()),
                   model.hp.embedding_dim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out.grads.row(static_cast<Eigen::Index>(i)) =
        dx.row(static_cast<Eigen::Index>(positions[i]));
  }
  return out;
}

ByteCnnModel make_random_cnn(const CnnHyperparams& hp, std::uint64_t seed) {
  if (hp.max_input_len < hp.kernel_width || hp.stride <= 0) {
    raise(Errc::config_error, "model window smaller than the kernel");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto fill = [&](Eigen::MatrixXd& m, double scale) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = scale * dist(rng);
    }
  };
  ByteCnnModel model;
  model.hp = hp;
  const int wd = hp.kernel_width * hp.embedding_dim;
  model.embedding.resize(257, hp.embedding_dim);
  fill(model.embedding, 0.5);
  model.conv_a.resize(hp.channels, wd);
  fill(model.conv_a, 1.0 / std::sqrt(static_cast<double>(wd)));
  model.conv_b.resize(hp.channels, wd);
  fill(model.conv_b, 1.0 / std::sqrt(static_cast<double>(wd)));
  model.bias_a = Eigen::VectorXd::Zero(hp.channels);
  model.bias_b = Eigen::VectorXd::Zero(hp.channels);
  Eigen::MatrixXd dw(hp.channels, 1);
  fill(dw, 1.0 / std::sqrt(static_cast<double>(hp.channels)));
  model.dense_w = dw.col(0);
  model.dense_b = 0.0;
  return model;
}

ByteCnnModel train_cnn(const std::vector<RawExe>& dataset,
                       const CnnHyperparams& hp, std::uint64_t seed,
                       TrainReport* report) {
  bool any_benign = false, any_malicious = false;
  for (const auto& s : dataset) {
    (s.label == Label::benign ? any_benign : any_malicious) = true;
  }
  if (!any_benign || !any_malicious) {
    raise(Errc::degenerate_dataset, "training set must contain both classes");
  }

  ByteCnnModel model = make_random_cnn(hp, seed);
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  double accuracy = 0.0, loss = 0.0;
  int epochs_run = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      ParamGrads grads(model);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& s = dataset[order[i]];
        const double y = s.label == Label::malicious ? 1.0 : 0.0;
        const Forward f = run_forward(model, s.bytes);
        const double dlogit = (f.prob - y) / static_cast<double>(stop - start);
        accumulate_grads(model, f, dlogit, grads);
      }
      const double lr = hp.learning_rate;
      model.embedding -= lr * grads.embedding;
      model.conv_a -= lr * grads.conv_a;
      model.conv_b -= lr * grads.conv_b;
      model.bias_a -= lr * grads.bias_a;
      model.bias_b -= lr * grads.bias_b;
      model.dense_w -= lr * grads.dense_w;
      model.dense_b -= lr * grads.dense_b;
    }

    std::size_t correct = 0;
    double total_loss = 0.0;
    for (const auto& s : dataset) {
      const double y = s.label == Label::malicious ? 1.0 : 0.0;
      const double p = cnn_score(model, s.bytes);
      correct += ((p >= 0.5) == (y > 0.5)) ? 1u : 0u;
      const double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
      total_loss += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    }
    accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    loss = total_loss / static_cast<double>(dataset.size());
    epochs_run = epoch + 1;
    if (accuracy >= hp.early_stop_accuracy) break;
  }

  if (report) {
    report->final_accuracy = accuracy;
    report->final_loss = loss;
    report->epochs_run = epochs_run;
  }
  return model;
}

}  // namespace pevade
