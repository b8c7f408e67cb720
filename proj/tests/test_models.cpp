#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "pevade/error.hpp"
#include "pevade/manip/manipulations.hpp"
#include "pevade/model/byte_cnn.hpp"
#include "pevade/model/features.hpp"
#include "pevade/model/gbdt.hpp"
#include "pevade/model/model_io.hpp"
#include "pevade/pe/synth.hpp"
#include "reference_net.hpp"

using namespace pevade;
using testref::naive_cnn_score;
using testref::naive_forward_embedded;
using testref::sg;

namespace {

CnnHyperparams tiny_hp() {
  CnnHyperparams hp;
  hp.embedding_dim = 4;
  hp.kernel_width = 8;
  hp.channels = 6;
  hp.max_input_len = 64;
  hp.stride = 4;  // overlapping windows exercise the general case
  return hp;
}

Bytes random_bytes(std::size_t n, std::mt19937_64& rng) {
  Bytes b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng());
  return b;
}

std::vector<RawExe> toy_dataset(int per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RawExe> out;
  for (int cls = 0; cls < 2; ++cls) {
    for (int i = 0; i < per_class; ++i) {
      pe::SynthSpec spec;
      spec.num_sections = 1;
      spec.sections.resize(1);
      spec.seed = rng();
      Bytes content(600 + rng() % 400);
      for (auto& b : content) {
        b = cls == 0 ? static_cast<std::uint8_t>(0x20 + rng() % 0x5F)
                     : static_cast<std::uint8_t>(0x80 + rng() % 0x80);
      }
      spec.sections[0].content = std::move(content);
      RawExe s;
      s.bytes = pe::synth_pe(spec);
      s.sample_id = (cls == 0 ? "b" : "m") + std::to_string(i);
      s.label = cls == 0 ? Label::benign : Label::malicious;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("cnn_score matches the straight-line reference") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const ByteCnnModel m = make_random_cnn(tiny_hp(), rng());
    const Bytes input = random_bytes(16 + rng() % 96, rng);
    const double fast = cnn_score(m, input);
    const double slow = naive_cnn_score(m, input);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
    CHECK(std::abs(fast - slow) < 1e-6);
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("cnn_score determinism and degenerate dense layer") {
  std::mt19937_64 rng(32);
  ByteCnnModel m = make_random_cnn(tiny_hp(), 5);
  const Bytes input = random_bytes(80, rng);
  const double first = cnn_score(m, input);
  for (int i = 0; i < 100; ++i) CHECK(cnn_score(m, input) == first);

  m.dense_w.setZero();
  m.dense_b = 0.0;
  CHECK(cnn_score(m, input) == 0.5);
}

TEST_CASE("cnn_score ignores bytes past the window") {
  ByteCnnModel m = make_random_cnn(tiny_hp(), 6);
  std::mt19937_64 rng(33);
  Bytes input = random_bytes(200, rng);  // longer than n = 64
  const double s = cnn_score(m, input);
  for (std::size_t i = 64; i < input.size(); ++i) input[i] ^= 0xFF;
  CHECK(cnn_score(m, input) == s);
}

TEST_CASE("cnn_grad matches central finite differences") {
  std::mt19937_64 rng(34);
  double worst = 0.0;
  for (int trial = 0; trial < 12; ++trial) {
    const ByteCnnModel m = make_random_cnn(tiny_hp(), rng());
    const Bytes input = random_bytes(64, rng);
    const int n = m.hp.max_input_len, d = m.hp.embedding_dim;

    std::vector<std::size_t> positions;
    for (int i = 0; i < 10; ++i) positions.push_back(rng() % n);
    const EmbeddingGradient g = cnn_grad(m, input, positions);

    std::vector<double> X = testref::embed_input(m, input);
    const double eps = 1e-4;
    for (std::size_t r = 0; r < positions.size(); ++r) {
      for (int dd = 0; dd < d; ++dd) {
        const std::size_t idx =
            static_cast<std::size_t>(positions[r]) * static_cast<std::size_t>(d) +
            static_cast<std::size_t>(dd);
        const double keep = X[idx];
        X[idx] = keep + eps;
        const double up = naive_forward_embedded(m, X);
        X[idx] = keep - eps;
        const double dn = naive_forward_embedded(m, X);
        X[idx] = keep;
        const double fd = (up - dn) / (2 * eps);
        const double an = g.grads(static_cast<Eigen::Index>(r), dd);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        worst = std::max(worst, std::abs(fd - an) / denom);
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("cnn_grad edge behaviour") {
  ByteCnnModel m = make_random_cnn(tiny_hp(), 77);
  std::mt19937_64 rng(35);
  const Bytes input = random_bytes(64, rng);

  SUBCASE("out-of-window position") {
    try {
      static_cast<void>(cnn_grad(m, input, {64}));
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::position_out_of_range);
    }
  }
  SUBCASE("zero dense weights give a zero gradient") {
    m.dense_w.setZero();
    const auto g = cnn_grad(m, input, {0, 5, 63});
    CHECK(g.grads.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("positions outside every argmax receptive field get zero rows") {
    // 6 channels can pin at most 6 windows of 8 positions, so some of the
    // 64 positions are guaranteed to sit outside every argmax window.
    std::vector<std::size_t> all(64);
    for (std::size_t i = 0; i < 64; ++i) all[i] = i;
    const auto g = cnn_grad(m, input, all);
    bool any_zero_row = false;
    for (Eigen::Index r = 0; r < g.grads.rows(); ++r) {
      if (g.grads.row(r).cwiseAbs().maxCoeff() == 0.0) any_zero_row = true;
    }
    CHECK(any_zero_row);
  }
}

TEST_CASE("train_cnn learns a separable toy set and is seed-stable") {
  const auto data = toy_dataset(12, 2025);
  CnnHyperparams hp = tiny_hp();
  hp.max_input_len = 1024;
  hp.kernel_width = 16;
  hp.stride = 16;
  hp.channels = 12;
  hp.epochs = 25;
  hp.batch_size = 8;
  TrainReport rep;
  const ByteCnnModel m1 = train_cnn(data, hp, 7, &rep);
  CHECK(rep.final_accuracy >= 0.95);

  const ByteCnnModel m2 = train_cnn(data, hp, 7, nullptr);
  CHECK(m1.embedding == m2.embedding);
  CHECK(m1.conv_a == m2.conv_a);
  CHECK(m1.conv_b == m2.conv_b);
  CHECK(m1.dense_w == m2.dense_w);
  CHECK(m1.dense_b == m2.dense_b);

  std::vector<RawExe> single(data.begin(), data.begin() + 5);
  CHECK_THROWS_AS(static_cast<void>(train_cnn(single, hp, 7)), Error);
}

TEST_CASE("extract_features schema") {
  pe::SynthSpec spec;
  spec.num_sections = 2;
  spec.sections.resize(2);
  spec.sections[0].content_len = 800;
  spec.sections[1].content_len = 400;
  spec.overlay_len = 16;
  spec.seed = 3;
  const Bytes file = pe::synth_pe(spec);
  const Eigen::VectorXd f = extract_features(file);
  REQUIRE(f.size() == kFeatureDim);
  CHECK(f.head(kHistogramBins).sum() == doctest::Approx(1.0));
  const int base = kHistogramBins + kSectionEntropySlots;
  CHECK(f(base + 0) == 2.0);
  CHECK(f(base + 2) == static_cast<double>(file.size()));
  CHECK(f(base + 3) == 16.0);

  SUBCASE("all-zero section content concentrates the histogram in bin 0") {
    pe::SynthSpec z;
    z.num_sections = 1;
    z.sections.resize(1);
    z.sections[0].content = Bytes(8000, 0);
    z.seed = 1;
    const Bytes zf = pe::synth_pe(z);
    const Eigen::VectorXd zfeat = extract_features(zf);
    std::size_t zeros = 0;
    for (auto b : zf) zeros += b == 0 ? 1 : 0;
    CHECK(zfeat(0) ==
          doctest::Approx(static_cast<double>(zeros) / zf.size()));
    CHECK(zfeat(0) > 0.9);  // headers keep it just below 1.0
  }

  SUBCASE("padding shifts only bin 0 mass, file length and overlay length") {
    const std::size_t k = 3000;
    const Bytes padded = padding(file, k).bytes();
    const Eigen::VectorXd g = extract_features(padded);
    const double scale = static_cast<double>(file.size()) /
                         static_cast<double>(file.size() + k);
    CHECK(g(0) > f(0));
    for (int bin = 1; bin < kHistogramBins; ++bin) {
      CHECK(g(bin) == doctest::Approx(f(bin) * scale).epsilon(1e-9));
    }
    for (int s = 0; s < kSectionEntropySlots; ++s) {
      CHECK(g(kHistogramBins + s) == f(kHistogramBins + s));
    }
    CHECK(g(base + 0) == f(base + 0));
    CHECK(g(base + 1) == f(base + 1));
    CHECK(g(base + 2) == f(base + 2) + static_cast<double>(k));
    CHECK(g(base + 3) == f(base + 3) + static_cast<double>(k));
  }

  SUBCASE("invalid input is rejected") {
    CHECK_THROWS_AS(static_cast<void>(extract_features(Bytes{'Z', 'Z'})), Error);
  }
}

TEST_CASE("single-split tree is a step function") {
  TreeModel m;
  m.hp.learning_rate = 1.0;
  RegressionTree t;
  t.nodes.push_back({3, 0.5, 1, 2, 0.0});
  t.nodes.push_back({-1, 0.0, -1, -1, -2.0});
  t.nodes.push_back({-1, 0.0, -1, -1, 2.0});
  m.trees.push_back(t);

  Eigen::VectorXd x = Eigen::VectorXd::Zero(kFeatureDim);
  x(3) = 0.25;
  CHECK(tree_logit(m, x) == -2.0);
  x(3) = 0.75;
  CHECK(tree_logit(m, x) == 2.0);
}

TEST_CASE("boosting score is monotone in an added tree's output") {
  const auto data = toy_dataset(8, 9);
  GbdtHyperparams hp;
  hp.num_trees = 10;
  TreeModel m = train_trees(data, hp, 0);
  const Eigen::VectorXd x = extract_features(data[0].bytes);
  const double before = sg(tree_logit(m, x));

  RegressionTree bump;
  bump.nodes.push_back({-1, 0.0, -1, -1, 1.5});
  m.trees.push_back(bump);
  CHECK(sg(tree_logit(m, x)) > before);
}

TEST_CASE("train_trees fits the toy set deterministically") {
  const auto data = toy_dataset(10, 77);
  GbdtHyperparams hp;
  TrainReport rep;
  const TreeModel m1 = train_trees(data, hp, 1, &rep);
  CHECK(rep.final_accuracy >= 0.95);

  const TreeModel m2 = train_trees(data, hp, 1);
  for (const auto& s : data) {
    CHECK(tree_score(m1, s.bytes) == tree_score(m2, s.bytes));
    const double p = tree_score(m1, s.bytes);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }

  std::vector<RawExe> single(data.begin(), data.begin() + 3);
  CHECK_THROWS_AS(static_cast<void>(train_trees(single, hp, 1)), Error);
}

TEST_CASE("model container round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pevade_models";
  std::filesystem::create_directories(dir);

  SUBCASE("cnn") {
    const ByteCnnModel m = make_random_cnn(tiny_hp(), 404);
    const auto path = dir / "cnn.bin";
    save_model(path, m, 0.4);
    const auto loaded = load_classifier(path);
    CHECK(loaded->kind() == "byte-cnn");
    CHECK(loaded->threshold() == doctest::Approx(0.4));
    CHECK(loaded->differentiable());

    // save(load(x)) is bit-stable: f32 quantization happens exactly once
    const auto* cnn = dynamic_cast<const ByteCnnClassifier*>(loaded.get());
    REQUIRE(cnn != nullptr);
    const auto path2 = dir / "cnn2.bin";
    save_model(path2, cnn->model(), loaded->threshold());
    CHECK(read_file(path) == read_file(path2));

    std::mt19937_64 rng(1);
    const Bytes input = random_bytes(64, rng);
    CHECK(loaded->score(input) >= 0.0);
    CHECK(loaded->score(input) <= 1.0);
  }
  SUBCASE("gbdt") {
    const auto data = toy_dataset(6, 5);
    const TreeModel m = train_trees(data, GbdtHyperparams{}, 0);
    const auto path = dir / "gbdt.bin";
    save_model(path, m, 0.5);
    const auto loaded = load_classifier(path);
    CHECK(loaded->kind() == "gbdt");
    CHECK_FALSE(loaded->differentiable());
    const auto path2 = dir / "gbdt2.bin";
    const auto* g = dynamic_cast<const GbdtClassifier*>(loaded.get());
    REQUIRE(g != nullptr);
    save_model(path2, g->model(), loaded->threshold());
    CHECK(read_file(path) == read_file(path2));
  }
  SUBCASE("bad magic and version are rejected") {
    const auto path = dir / "junk.bin";
    write_file(path, Bytes{'n', 'o', 'p', 'e'});
    CHECK_THROWS_AS(static_cast<void>(load_classifier(path)), Error);

    const ByteCnnModel m = make_random_cnn(tiny_hp(), 1);
    const auto vpath = dir / "ver.bin";
    save_model(vpath, m, 0.5);
    Bytes tampered = read_file(vpath);
    write_u32(tampered, 8, 999);  // version field
    write_file(vpath, tampered);
    CHECK_THROWS_AS(static_cast<void>(load_classifier(vpath)), Error);
  }
}
