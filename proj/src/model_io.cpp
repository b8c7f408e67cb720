#include "pevade/model/model_io.hpp"

#include <cstring>

#include "pevade/error.hpp"

namespace pevade {

namespace {

constexpr char kMagic[8] = {'P', 'V', 'M', 'O', 'D', 'E', 'L', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kKindCnn = 1;
constexpr std::uint32_t kKindGbdt = 2;

struct Writer {
  Bytes out;

  void u32(std::uint32_t v) {
    const std::size_t at = out.size();
    out.resize(at + 4);
    write_u32(out, at, v);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f32_array(const double* data, std::size_t count) {
    u32(static_cast<std::uint32_t>(count));
    for (std::size_t i = 0; i < count; ++i) {
      f32(static_cast<float>(data[i]));
    }
  }
  void matrix(const Eigen::MatrixXd& m) {
    // row-major flattening, fixed regardless of Eigen's storage order
    u32(static_cast<std::uint32_t>(m.rows() * m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        f32(static_cast<float>(m(r, c)));
      }
    }
  }
};

struct Reader {
  const Bytes& in;
  std::size_t pos = 0;

  std::uint32_t u32() {
    if (pos + 4 > in.size()) raise(Errc::io_error, "model container truncated");
    const std::uint32_t v = read_u32(in, pos);
    pos += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void matrix(Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    const std::uint32_t count = u32();
    if (count != static_cast<std::uint32_t>(rows * cols)) {
      raise(Errc::io_error, "model container: array length mismatch");
    }
    m.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f32();
    }
  }
  void vector(Eigen::VectorXd& v, Eigen::Index size) {
    const std::uint32_t count = u32();
    if (count != static_cast<std::uint32_t>(size)) {
      raise(Errc::io_error, "model container: array length mismatch");
    }
    v.resize(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = f32();
  }
};

Writer make_header(std::uint32_t kind, double threshold) {
  Writer w;
  w.out.insert(w.out.end(), kMagic, kMagic + 8);
  w.u32(kVersion);
  w.u32(kind);
  w.f32(static_cast<float>(threshold));
  return w;
}

}  // namespace

void save_model(const std::filesystem::path& path, const ByteCnnModel& model,
                double threshold) {
  Writer w = make_header(kKindCnn, threshold);
  w.u32(static_cast<std::uint32_t>(model.hp.embedding_dim));
  w.u32(static_cast<std::uint32_t>(model.hp.kernel_width));
  w.u32(static_cast<std::uint32_t>(model.hp.channels));
  w.u32(static_cast<std::uint32_t>(model.hp.max_input_len));
  w.u32(static_cast<std::uint32_t>(model.hp.stride));
  w.matrix(model.embedding);
  w.matrix(model.conv_a);
  w.f32_array(model.bias_a.data(), static_cast<std::size_t>(model.bias_a.size()));
  w.matrix(model.conv_b);
  w.f32_array(model.bias_b.data(), static_cast<std::size_t>(model.bias_b.size()));
  w.f32_array(model.dense_w.data(), static_cast<std::size_t>(model.dense_w.size()));
  w.f32(static_cast<float>(model.dense_b));
  write_file(path, w.out);
}

void save_model(const std::filesystem::path& path, const TreeModel& model,
                double threshold) {
  Writer w = make_header(kKindGbdt, threshold);
  w.u32(static_cast<std::uint32_t>(model.feature_dim));
  w.u32(static_cast<std::uint32_t>(model.hp.max_depth));
  w.f32(static_cast<float>(model.hp.learning_rate));
  w.u32(static_cast<std::uint32_t>(model.trees.size()));
  for (const auto& tree : model.trees) {
    w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
    for (const auto& n : tree.nodes) {
      w.i32(n.feature);
      w.f32(static_cast<float>(n.threshold));
      w.i32(n.left);
      w.i32(n.right);
      w.f32(static_cast<float>(n.value));
    }
  }
  write_file(path, w.out);
}

std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path) {
  const Bytes data = read_file(path);
  if (data.size() < 8 || std::memcmp(data.data(), kMagic, 8) != 0) {
    raise(Errc::io_error, "not a model container: " + path.string());
  }
  Reader r{data, 8};
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    raise(Errc::io_error, "unsupported model container version " +
                              std::to_string(version));
  }
  const std::uint32_t kind = r.u32();
  const double threshold = r.f32();

  if (kind == kKindCnn) {
    ByteCnnModel m;
    m.hp.embedding_dim = static_cast<int>(r.u32());
    m.hp.kernel_width = static_cast<int>(r.u32());
    m.hp.channels = static_cast<int>(r.u32());
    m.hp.max_input_len = static_cast<int>(r.u32());
    m.hp.stride = static_cast<int>(r.u32());
    r.matrix(m.embedding, 257, m.hp.embedding_dim);
    const Eigen::Index wd = static_cast<Eigen::Index>(m.hp.kernel_width) *
                            m.hp.embedding_dim;
    r.matrix(m.conv_a, m.hp.channels, wd);
    r.vector(m.bias_a, m.hp.channels);
    r.matrix(m.conv_b, m.hp.channels, wd);
    r.vector(m.bias_b, m.hp.channels);
    r.vector(m.dense_w, m.hp.channels);
    m.dense_b = r.f32();
    auto c = std::make_unique<ByteCnnClassifier>(std::move(m));
    c->set_threshold(threshold);
    return c;
  }
  if (kind == kKindGbdt) {
    TreeModel m;
    m.feature_dim = static_cast<int>(r.u32());
    m.hp.max_depth = static_cast<int>(r.u32());
    m.hp.learning_rate = r.f32();
    const std::uint32_t num_trees = r.u32();
    m.trees.resize(num_trees);
    for (auto& tree : m.trees) {
      const std::uint32_t num_nodes = r.u32();
      tree.nodes.resize(num_nodes);
      for (auto& n : tree.nodes) {
        n.feature = r.i32();
        n.threshold = r.f32();
        n.left = r.i32();
        n.right = r.i32();
        n.value = r.f32();
      }
    }
    auto c = std::make_unique<GbdtClassifier>(std::move(m));
    c->set_threshold(threshold);
    return c;
  }
  raise(Errc::io_error, "unknown model kind " + std::to_string(kind));
}

}  // namespace pevade
