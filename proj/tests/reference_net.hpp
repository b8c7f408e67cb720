#pragma once

// Test-only reference implementations, kept as straight loops with no Eigen
// expressions so they stay an independent route from the library code they
// check.

#include <cmath>
#include <vector>

#include "pevade/model/byte_cnn.hpp"

namespace pevade::testref {

inline double sg(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Same forward equations as cnn_score: embed, two convolutions, gated
/// product, temporal max (lowest index on ties), dense, sigmoid.
inline double naive_cnn_score(const ByteCnnModel& m, const Bytes& bytes) {
  const int n = m.hp.max_input_len, d = m.hp.embedding_dim;
  const int w = m.hp.kernel_width, c = m.hp.channels, st = m.hp.stride;
  const int mwin = (n - w) / st + 1;
  std::vector<int> tok(static_cast<std::size_t>(n), kPaddingToken);
  for (int i = 0; i < n && i < static_cast<int>(bytes.size()); ++i) {
    tok[static_cast<std::size_t>(i)] = bytes[static_cast<std::size_t>(i)];
  }
  double logit = m.dense_b;
  for (int j = 0; j < c; ++j) {
    double best = -1e300;
    for (int t = 0; t < mwin; ++t) {
      double a = m.bias_a(j), b = m.bias_b(j);
      for (int k = 0; k < w; ++k) {
        for (int dd = 0; dd < d; ++dd) {
          const double e =
              m.embedding(tok[static_cast<std::size_t>(t * st + k)], dd);
          a += m.conv_a(j, k * d + dd) * e;
          b += m.conv_b(j, k * d + dd) * e;
        }
      }
      const double g = a * sg(b);
      if (g > best) best = g;
    }
    logit += m.dense_w(j) * best;
  }
  return sg(logit);
}

/// The network evaluated on an arbitrary embedded input (row-major n x d):
/// the function the finite-difference gradient oracle perturbs.
inline double naive_forward_embedded(const ByteCnnModel& m,
                                     const std::vector<double>& X) {
  const int n = m.hp.max_input_len, d = m.hp.embedding_dim;
  const int w = m.hp.kernel_width, c = m.hp.channels, st = m.hp.stride;
  const int mwin = (n - w) / st + 1;
  double logit = m.dense_b;
  for (int j = 0; j < c; ++j) {
    double best = -1e300;
    for (int t = 0; t < mwin; ++t) {
      double a = m.bias_a(j), b = m.bias_b(j);
      for (int k = 0; k < w; ++k) {
        for (int dd = 0; dd < d; ++dd) {
          const double e = X[static_cast<std::size_t>((t * st + k) * d + dd)];
          a += m.conv_a(j, k * d + dd) * e;
          b += m.conv_b(j, k * d + dd) * e;
        }
      }
      const double g = a * sg(b);
      if (g > best) best = g;
    }
    logit += m.dense_w(j) * best;
  }
  return sg(logit);
}

/// Embeds an input like the model does, row-major n x d.
inline std::vector<double> embed_input(const ByteCnnModel& m,
                                       const Bytes& bytes) {
  const int n = m.hp.max_input_len, d = m.hp.embedding_dim;
  std::vector<int> tok(static_cast<std::size_t>(n), kPaddingToken);
  for (int i = 0; i < n && i < static_cast<int>(bytes.size()); ++i) {
    tok[static_cast<std::size_t>(i)] = bytes[static_cast<std::size_t>(i)];
  }
  std::vector<double> X(static_cast<std::size_t>(n * d));
  for (int i = 0; i < n; ++i) {
    for (int dd = 0; dd < d; ++dd) {
      X[static_cast<std::size_t>(i * d + dd)] =
          m.embedding(tok[static_cast<std::size_t>(i)], dd);
    }
  }
  return X;
}

/// Exhaustive 256-candidate reconstruction search (lowest byte wins ties).
inline int oracle_reconstruct(const Eigen::VectorXd& cur,
                              const Eigen::VectorXd& grad,
                              const Eigen::MatrixXd& table, double step) {
  int best = 0;
  double best_d = 1e300;
  for (int b = 0; b < 256; ++b) {
    double dist = 0.0;
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      const double diff = table(b, j) - (cur(j) - step * grad(j));
      dist += diff * diff;
    }
    if (dist < best_d) {
      best_d = dist;
      best = b;
    }
  }
  return best;
}

}  // namespace pevade::testref
