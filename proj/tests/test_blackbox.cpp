#include <doctest.h>

#include <filesystem>
#include <random>

#include "pevade/attack/blackbox.hpp"
#include "pevade/attack/gamma.hpp"
#include "pevade/pe/pe.hpp"
#include "pevade/pe/synth.hpp"

using namespace pevade;

namespace {

/// Deterministic stand-in target: fraction of high bytes in the file. Benign
/// (printable) injections lower it, which is all these tests need. Every
/// scored candidate is also checked against the validator, so any attack that
/// ever queries with a structurally broken buffer fails the suite.
class HighByteModel : public Classifier {
 public:
  double score(const Bytes& bytes) const override {
    ++queries_;
    REQUIRE(pe::validate(bytes).ok);
    std::size_t hi = 0;
    for (auto b : bytes) hi += b >= 0x80 ? 1 : 0;
    return static_cast<double>(hi) / static_cast<double>(bytes.size());
  }
  bool differentiable() const noexcept override { return false; }
  std::string kind() const override { return "high-byte-stub"; }
  std::uint64_t queries() const { return queries_; }
  void reset_queries() const { queries_ = 0; }

 private:
  mutable std::uint64_t queries_ = 0;
};

RawExe high_byte_sample(std::uint64_t seed) {
  pe::SynthSpec spec;
  spec.num_sections = 1;
  spec.header_offset = 0x80;
  spec.sections.resize(1);
  Bytes content(1800);
  std::mt19937_64 rng(seed);
  for (auto& b : content) b = static_cast<std::uint8_t>(0x80 + rng() % 0x80);
  spec.sections[0].content = std::move(content);
  spec.seed = seed;
  RawExe s;
  s.bytes = pe::synth_pe(spec);
  s.sample_id = "hb" + std::to_string(seed);
  s.label = Label::malicious;
  return s;
}

std::vector<SectionPayload> printable_payloads(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SectionPayload> out;
  for (int i = 0; i < count; ++i) {
    SectionPayload p;
    p.content.resize(500 + rng() % 1500);
    for (auto& b : p.content) b = static_cast<std::uint8_t>(0x20 + rng() % 0x5F);
    p.source_name = {'.', 'd', 'a', 't', 'a', 0, 0, 0};
    p.source_sample = "g" + std::to_string(i);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("run_genetic converges on the sphere objective") {
  auto sphere = [](const Genome& g) { return g.squaredNorm(); };
  GeneticConfig cfg;
  cfg.seed = 1;
  const auto res = run_genetic(sphere, 4, cfg);
  CHECK(res.best_outcome.fitness <= 0.01);
  CHECK(res.trace.steps.size() <= cfg.max_queries);
}

TEST_CASE("run_genetic best-so-far is monotone and seed-stable") {
  auto sphere = [](const Genome& g) { return (g.array() - 0.3).matrix().squaredNorm(); };
  GeneticConfig cfg;
  cfg.seed = 9;
  const auto a = run_genetic(sphere, 6, cfg);
  const auto b = run_genetic(sphere, 6, cfg);
  REQUIRE(a.trace.steps.size() == b.trace.steps.size());
  for (std::size_t i = 0; i < a.trace.steps.size(); ++i) {
    CHECK(a.trace.steps[i].score == b.trace.steps[i].score);
    if (i > 0) CHECK(a.trace.steps[i].score <= a.trace.steps[i - 1].score + 1e-15);
  }
  CHECK(a.best == b.best);
}

TEST_CASE("run_genetic rejects an unaffordable population") {
  auto sphere = [](const Genome& g) { return g.squaredNorm(); };
  GeneticConfig cfg;
  cfg.population_size = 20;
  cfg.max_queries = 10;
  try {
    static_cast<void>(run_genetic(sphere, 4, cfg));
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::budget_too_small);
  }
}

TEST_CASE("run_blackbox_bytes contracts") {
  const RawExe sample = high_byte_sample(4);
  HighByteModel model;

  SUBCASE("partial dos genome length is 58 and accounting is exact") {
    GeneticConfig cfg;
    cfg.max_queries = 60;
    cfg.seed = 3;
    model.reset_queries();
    const auto trace =
        run_blackbox_bytes(sample, {ManipKind::partial_dos, 0, 0}, model, cfg);
    // one query per trace step, plus the one baseline scoring pass
    CHECK(model.queries() == trace.steps.size() + 1);
    CHECK(trace.steps.size() <= 60);
    CHECK(pe::validate(trace.final_bytes).ok);
    CHECK(trace.final_bytes.size() == sample.bytes.size());
  }

  SUBCASE("query budget is never exceeded") {
    for (std::uint64_t budget : {10ull, 37ull, 500ull}) {
      GeneticConfig cfg;
      cfg.max_queries = budget;
      cfg.seed = 5;
      const auto trace =
          run_blackbox_bytes(sample, {ManipKind::slack_fill, 0, 0}, model, cfg);
      CHECK(trace.steps.size() <= budget);
      for (std::size_t i = 1; i < trace.steps.size(); ++i) {
        CHECK(trace.steps[i].effort == trace.steps[i - 1].effort + 1);
      }
    }
  }

  SUBCASE("same seed gives the identical trace") {
    GeneticConfig cfg;
    cfg.max_queries = 80;
    cfg.seed = 11;
    const auto t1 =
        run_blackbox_bytes(sample, {ManipKind::extend, 512, 0}, model, cfg);
    const auto t2 =
        run_blackbox_bytes(sample, {ManipKind::extend, 512, 0}, model, cfg);
    REQUIRE(t1.steps.size() == t2.steps.size());
    for (std::size_t i = 0; i < t1.steps.size(); ++i) {
      CHECK(t1.steps[i].score == t2.steps[i].score);
    }
    CHECK(t1.final_bytes == t2.final_bytes);
  }

  SUBCASE("padding attack lowers the high-byte score") {
    GeneticConfig cfg;
    cfg.max_queries = 120;
    cfg.seed = 2;
    const auto trace =
        run_blackbox_bytes(sample, {ManipKind::padding, 0, 1024}, model, cfg);
    CHECK(trace.steps.back().score < trace.initial_score);
  }
}

TEST_CASE("harvest_sections is deterministic and filterable") {
  const auto dir = std::filesystem::temp_directory_path() / "pevade_goodware";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (int i = 0; i < 10; ++i) {
    pe::SynthSpec spec;
    spec.num_sections = 2;
    spec.sections.resize(2);
    spec.sections[0].name = ".text";
    spec.sections[0].content_len = 400;
    spec.sections[1].name = ".data";
    spec.sections[1].content_len = 600 + static_cast<std::size_t>(i) * 16;
    spec.seed = static_cast<std::uint64_t>(i);
    char name[16];
    std::snprintf(name, sizeof name, "g%02d.exe", i);
    write_file(dir / name, pe::synth_pe(spec));
  }
  // one non-PE straggler that must be skipped
  write_file(dir / "notes.txt", Bytes{'h', 'i'});

  const auto payloads = harvest_sections(dir, ".data", 100);
  CHECK(payloads.size() == 10);  // supply-limited
  const auto again = harvest_sections(dir, ".data", 100);
  REQUIRE(again.size() == payloads.size());
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    CHECK(payloads[i].content == again[i].content);
    CHECK(payloads[i].source_sample == again[i].source_sample);
  }
  CHECK(std::is_sorted(payloads.begin(), payloads.end(),
                       [](const SectionPayload& a, const SectionPayload& b) {
                         return a.source_sample < b.source_sample;
                       }));

  const auto capped = harvest_sections(dir, ".data", 4);
  CHECK(capped.size() == 4);
  CHECK(capped[0].content == payloads[0].content);

  try {
    static_cast<void>(harvest_sections(dir, ".rsrc", 10));
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_payloads_found);
  }
}

TEST_CASE("payload store round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pevade_payloads";
  std::filesystem::remove_all(dir);
  const auto payloads = printable_payloads(5, 8);
  save_payloads(dir, payloads);
  const auto loaded = load_payloads(dir);
  REQUIRE(loaded.size() == payloads.size());
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    CHECK(loaded[i].content == payloads[i].content);
    CHECK(loaded[i].source_sample == payloads[i].source_sample);
    CHECK(loaded[i].source_name == payloads[i].source_name);
  }
}

TEST_CASE("gamma_fitness arithmetic") {
  const RawExe sample = high_byte_sample(12);
  HighByteModel model;
  GammaConfig cfg;
  cfg.payloads = printable_payloads(4, 3);

  SUBCASE("all-zero genome is the identity") {
    cfg.lambda = 1e-5;
    const Genome zeros = Genome::Zero(4);
    const auto out = gamma_fitness(sample, zeros, model, cfg);
    CHECK(out.injected_bytes == 0);
    CHECK(out.fitness == model.score(sample.bytes));
  }
  SUBCASE("lambda zero leaves the raw score") {
    cfg.lambda = 0.0;
    Genome g = Genome::Constant(4, 0.5);
    const auto out = gamma_fitness(sample, g, model, cfg);
    CHECK(out.fitness == out.score);
    CHECK(out.injected_bytes > 0);
  }
  SUBCASE("penalty is lambda times the injected byte count") {
    cfg.lambda = 1e-5;
    // force exactly 1000 injected bytes with one payload of 1000 bytes
    GammaConfig one;
    one.lambda = 1e-5;
    one.payloads = {{Bytes(1000, 'x'), {'.', 'd', 0, 0, 0, 0, 0, 0}, "g"}};
    const auto out = gamma_fitness(sample, Genome::Ones(1), model, one);
    CHECK(out.injected_bytes == 1000);
    CHECK(out.fitness == doctest::Approx(out.score + 0.01));
  }
  SUBCASE("genome length must match the payload count") {
    try {
      static_cast<void>(gamma_fitness(sample, Genome::Zero(3), model, cfg));
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::length_mismatch);
    }
  }
}

TEST_CASE("run_gamma lowers the score and respects the budget") {
  const RawExe sample = high_byte_sample(13);
  HighByteModel model;
  GammaConfig gcfg;
  gcfg.lambda = 1e-5;
  gcfg.payloads = printable_payloads(10, 21);
  GeneticConfig cfg;
  cfg.max_queries = 150;
  cfg.seed = 6;

  model.reset_queries();
  const auto trace = run_gamma(sample, model, gcfg, cfg);
  CHECK(trace.steps.size() <= 150);
  CHECK(model.queries() == trace.steps.size() + 1);
  CHECK(trace.steps.back().score < trace.initial_score);
  CHECK(trace.steps.back().injected_bytes > 0);
  CHECK(pe::validate(trace.final_bytes).ok);
}

TEST_CASE("a huge lambda suppresses injection") {
  const RawExe sample = high_byte_sample(14);
  HighByteModel model;
  GammaConfig gcfg;
  gcfg.lambda = 1e6;
  gcfg.payloads = printable_payloads(3, 4);
  GeneticConfig cfg;
  cfg.max_queries = 500;
  cfg.seed = 3;
  const auto trace = run_gamma(sample, model, gcfg, cfg);
  CHECK(trace.steps.back().injected_bytes < 512);
}

TEST_CASE("binary inclusion decodes genes at the half threshold") {
  const RawExe sample = high_byte_sample(16);
  GammaConfig cfg;
  cfg.binary_inclusion = true;
  cfg.payloads = printable_payloads(3, 6);
  const Genome g = (Eigen::VectorXd(3) << 0.49, 0.5, 0.99).finished();
  const auto cand = gamma_build(sample.bytes, g, cfg);
  // payloads 1 and 2 fully included, payload 0 dropped
  CHECK(cand.injected_bytes ==
        cfg.payloads[1].content.size() + cfg.payloads[2].content.size());
}

TEST_CASE("a negative regularization weight is rejected") {
  const RawExe sample = high_byte_sample(17);
  HighByteModel model;
  GammaConfig cfg;
  cfg.lambda = -1.0;
  cfg.payloads = printable_payloads(2, 7);
  CHECK_THROWS_AS(
      static_cast<void>(gamma_fitness(sample, Genome::Zero(2), model, cfg)),
      Error);
}

TEST_CASE("gamma section-injection mode adds sections per payload") {
  pe::SynthSpec spec;
  spec.num_sections = 1;
  spec.header_offset = 0x80;
  spec.extra_header_space = 512;  // room for several injected entries
  spec.sections.resize(1);
  spec.sections[0].content_len = 1500;
  spec.seed = 15;
  RawExe sample;
  sample.bytes = pe::synth_pe(spec);
  sample.sample_id = "roomy";
  sample.label = Label::malicious;

  GammaConfig gcfg;
  gcfg.mode = GammaMode::section_injection;
  gcfg.payloads = printable_payloads(3, 5);
  const Genome g = (Eigen::VectorXd(3) << 1.0, 0.0, 0.5).finished();
  const auto cand = gamma_build(sample.bytes, g, gcfg);
  CHECK(pe::validate(cand.bytes).ok);
  const auto p = pe::parse(cand.bytes);
  CHECK(p.num_sections == 3);  // original + two nonzero slices
  CHECK(cand.injected_bytes > 0);
}
