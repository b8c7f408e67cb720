#include <doctest.h>

#include <random>

#include "pevade/pe/format.hpp"
#include "pevade/pe/pe.hpp"
#include "pevade/pe/synth.hpp"

using namespace pevade;

namespace {

pe::SynthSpec two_section_spec() {
  pe::SynthSpec spec;
  spec.num_sections = 2;
  spec.file_alignment = 512;
  spec.section_alignment = 4096;
  spec.header_offset = 0x80;
  spec.sections.resize(2);
  spec.sections[0].name = ".text";
  spec.sections[0].content_len = 700;
  spec.sections[1].name = ".data";
  spec.sections[1].content_len = 300;
  spec.overlay_len = 10;
  spec.seed = 42;
  return spec;
}

}  // namespace

TEST_CASE("align_up basics") {
  CHECK(pe::align_up(0, 512) == 0);
  CHECK(pe::align_up(512, 512) == 512);
  CHECK(pe::align_up(513, 512) == 1024);
  CHECK_THROWS_AS(pe::align_up(5, 0), Error);
  CHECK_THROWS_AS(pe::align_up(5, 3), Error);
}

TEST_CASE("align_up properties over random inputs") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint64_t> vdist(0, 1u << 30);
  std::uniform_int_distribution<int> adist(0, 20);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t v = vdist(rng);
    const std::uint64_t a = 1ull << adist(rng);
    const std::uint64_t r = pe::align_up(v, a);
    CHECK(r % a == 0);
    CHECK(r >= v);
    CHECK(r - v < a);
  }
}

TEST_CASE("parse round-trips the builder spec") {
  const auto spec = two_section_spec();
  const Bytes file = pe::synth_pe(spec);
  const auto p = pe::parse(file);

  CHECK(p.dos_magic == pe::kDosMagic);
  CHECK(p.header_offset == 0x80);
  CHECK(p.num_sections == 2);
  CHECK(p.file_alignment == 512);
  CHECK(p.section_alignment == 4096);
  CHECK(p.sections[0].name_str() == ".text");
  CHECK(p.sections[1].name_str() == ".data");
  CHECK(p.sections[0].raw_size == 1024);  // align_up(700, 512)
  CHECK(p.sections[1].raw_size == 512);   // align_up(300, 512)
  CHECK(p.sections[0].virtual_size == 700);
  CHECK(p.sections[1].raw_pointer == p.sections[0].raw_end());
  CHECK(p.overlay.size() == 10);
  CHECK(p.overlay.end == file.size());
}

TEST_CASE("parse error taxonomy") {
  const Bytes file = pe::synth_pe(two_section_spec());

  SUBCASE("bad magic") {
    Bytes bad = file;
    bad[0] = 'Z';
    bad[1] = 'Z';
    CHECK_THROWS_WITH_AS(static_cast<void>(pe::parse(bad)),
                         doctest::Contains("BadDosMagic"), Error);
  }
  SUBCASE("truncated to 32 bytes") {
    Bytes bad(file.begin(), file.begin() + 32);
    try {
      static_cast<void>(pe::parse(bad));
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::truncated_file);
    }
  }
  SUBCASE("header offset out of range") {
    Bytes bad = file;
    write_u32(bad, pe::kHeaderOffsetField, 0x10);
    try {
      static_cast<void>(pe::parse(bad));
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_header_offset);
    }
  }
  SUBCASE("non power-of-two alignment") {
    Bytes bad = file;
    const auto p = pe::parse(file);
    write_u32(bad, p.optional_offset() + pe::kOptFileAlignment, 300);
    try {
      static_cast<void>(pe::parse(bad));
      FAIL("expected an exception");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::bad_alignment);
    }
  }
}

TEST_CASE("validate accepts the builder output and reports misalignment") {
  const Bytes file = pe::synth_pe(two_section_spec());
  CHECK(pe::validate(file).ok);

  Bytes bad = file;
  const auto p = pe::parse(file);
  // Knock the first section's raw pointer off file alignment.
  write_u32(bad, p.sections[0].entry_offset + pe::kSecRawPointer,
            p.sections[0].raw_pointer + 3);
  const auto rep = pe::validate(bad);
  CHECK_FALSE(rep.ok);
  bool saw_rule = false;
  for (const auto& v : rep.violations) {
    if (v.rule == "raw-alignment") saw_rule = true;
  }
  CHECK(saw_rule);
}

TEST_CASE("validate flags signed binaries") {
  const Bytes file = pe::synth_pe(two_section_spec());
  const auto p = pe::parse(file);
  Bytes signed_file = file;
  const std::size_t sec_dir = p.optional_offset() + pe::kOptDirsPe32 +
                              pe::kSecurityDirIndex * pe::kDataDirEntrySize;
  write_u32(signed_file, sec_dir, static_cast<std::uint32_t>(file.size()));
  write_u32(signed_file, sec_dir + 4, 16);
  const auto rep = pe::validate(signed_file);
  CHECK_FALSE(rep.ok);
  REQUIRE(rep.violations.size() >= 1);
  CHECK(rep.violations.front().rule == "signed-binary");
}

TEST_CASE("serialize(parse(b), b) is the identity on valid files") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 25; ++i) {
    pe::SynthSpec spec;
    spec.num_sections = 1 + static_cast<unsigned>(rng() % 4);
    spec.header_offset = 0x40 + 0x40 * static_cast<std::uint32_t>(rng() % 3);
    spec.overlay_len = rng() % 100;
    spec.pe64 = (rng() % 2) == 0;
    spec.seed = rng();
    for (unsigned s = 0; s < spec.num_sections; ++s) {
      pe::SectionSpec sec;
      sec.name = ".s" + std::to_string(s);
      sec.content_len = 200 + rng() % 2000;
      spec.sections.push_back(sec);
    }
    const Bytes file = pe::synth_pe(spec);
    REQUIRE(pe::validate(file).ok);
    CHECK(pe::serialize(pe::parse(file), file) == file);
  }
}

TEST_CASE("synth_pe rejects contradictory specs") {
  pe::SynthSpec spec = two_section_spec();
  spec.section_alignment = 256;  // below file_alignment
  CHECK_THROWS_AS(static_cast<void>(pe::synth_pe(spec)), Error);

  pe::SynthSpec empty = two_section_spec();
  empty.sections[1].content.clear();
  empty.sections[1].content_len = 0;
  CHECK_THROWS_AS(static_cast<void>(pe::synth_pe(empty)), Error);
}

TEST_CASE("synth_pe is deterministic and validates over random specs") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    pe::SynthSpec spec;
    spec.num_sections = 1 + static_cast<unsigned>(rng() % 3);
    spec.seed = rng();
    spec.overlay_len = rng() % 64;
    for (unsigned s = 0; s < spec.num_sections; ++s) {
      pe::SectionSpec sec;
      sec.content_len = 100 + rng() % 1500;
      spec.sections.push_back(sec);
    }
    const Bytes a = pe::synth_pe(spec);
    const Bytes b = pe::synth_pe(spec);
    CHECK(a == b);
    CHECK(pe::validate(a).ok);
  }
}

TEST_CASE("locate_slack arithmetic") {
  pe::SynthSpec spec;
  spec.num_sections = 1;
  spec.sections.resize(1);
  spec.sections[0].content_len = 300;
  spec.sections[0].virtual_size = 300;
  spec.seed = 5;
  const Bytes file = pe::synth_pe(spec);
  const auto p = pe::parse(file);

  const auto slack = pe::locate_slack(p, file);
  REQUIRE(slack.size() == 1);
  CHECK(slack[0].size() == 212);  // 512 - 300
  CHECK(slack[0].begin == p.sections[0].raw_pointer + 300);

  SUBCASE("virtual size covering the raw region leaves no slack") {
    pe::SynthSpec full = spec;
    full.sections[0].virtual_size = 512;
    const Bytes f2 = pe::synth_pe(full);
    CHECK(pe::locate_slack(pe::parse(f2), f2).empty());
  }
  SUBCASE("virtual size beyond raw size also leaves no slack") {
    pe::SynthSpec bss = spec;
    bss.sections[0].virtual_size = 4000;
    const Bytes f3 = pe::synth_pe(bss);
    CHECK(pe::locate_slack(pe::parse(f3), f3).empty());
  }
}

TEST_CASE("locate_overlay") {
  pe::SynthSpec spec = two_section_spec();
  const Bytes file = pe::synth_pe(spec);
  const auto ov = pe::locate_overlay(pe::parse(file), file);
  CHECK(ov.size() == 10);

  spec.overlay_len = 0;
  const Bytes no_ov = pe::synth_pe(spec);
  const auto empty = pe::locate_overlay(pe::parse(no_ov), no_ov);
  CHECK(empty.empty());
  CHECK(empty.begin == no_ov.size());
}

TEST_CASE("slack and overlay never intersect mapped section content") {
  std::mt19937_64 rng(123);
  for (int i = 0; i < 50; ++i) {
    pe::SynthSpec spec;
    spec.num_sections = 1 + static_cast<unsigned>(rng() % 3);
    spec.seed = rng();
    spec.overlay_len = rng() % 200;
    for (unsigned s = 0; s < spec.num_sections; ++s) {
      pe::SectionSpec sec;
      sec.content_len = 64 + rng() % 900;
      if (rng() % 2) {
        sec.virtual_size = static_cast<std::uint32_t>(sec.content_len / 2);
      }
      spec.sections.push_back(sec);
    }
    const Bytes file = pe::synth_pe(spec);
    const auto p = pe::parse(file);
    auto regions = pe::locate_slack(p, file);
    regions.push_back(pe::locate_overlay(p, file));
    for (const auto& r : regions) {
      for (const auto& s : p.sections) {
        const ByteInterval content{s.raw_pointer,
                                   s.raw_pointer + s.content_size()};
        CHECK_FALSE(r.overlaps(content));
      }
    }
  }
}

TEST_CASE("validate never throws on random garbage") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 3000; ++i) {
    Bytes junk(rng() % 600);
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
    CHECK_NOTHROW(static_cast<void>(pe::validate(junk)));
  }
}

TEST_CASE("builder JSON schema") {
  const std::string text = R"({
    "num_sections": 2,
    "file_alignment": 512,
    "section_alignment": 4096,
    "sections": [
      {"name": ".text", "content_len": 700},
      {"name": ".data", "content_len": 300, "virtual_size": 300}
    ],
    "overlay_len": 10,
    "seed": 42
  })";
  const auto spec = pe::parse_synth_spec(text);
  CHECK(spec.num_sections == 2);
  CHECK(spec.sections[1].virtual_size == 300);
  const Bytes file = pe::synth_pe(spec);
  CHECK(pe::validate(file).ok);

  CHECK_THROWS_AS(static_cast<void>(pe::parse_synth_spec(
                      R"({"num_sectionz": 1})")),
                  Error);
}
