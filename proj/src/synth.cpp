#include "pevade/pe/synth.hpp"

#include <json.hpp>
#include <random>

#include "pevade/error.hpp"
#include "pevade/pe/format.hpp"
#include "pevade/pe/pe.hpp"

namespace pevade::pe {

namespace {

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

void check_keys(const nlohmann::json& j,
                std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) { known = true; break; }
    }
    if (!known) {
      raise(Errc::config_error, "unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

}  // namespace

Bytes synth_pe(const SynthSpec& spec) {
  const auto fa = spec.file_alignment;
  const auto sa = spec.section_alignment;
  if (!is_pow2(fa) || !is_pow2(sa)) {
    raise(Errc::inconsistent_spec, "alignments must be powers of two");
  }
  if (sa < fa) {
    raise(Errc::inconsistent_spec, "section_alignment below file_alignment");
  }
  if (spec.header_offset < kDosHeaderSize) {
    raise(Errc::inconsistent_spec, "header_offset below 0x40");
  }
  if (!spec.sections.empty() && spec.sections.size() != spec.num_sections) {
    raise(Errc::inconsistent_spec,
          "num_sections disagrees with the sections list");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> byte_dist(0, 255);
  auto random_bytes = [&](std::size_t n) {
    Bytes b(n);
    for (auto& v : b) v = static_cast<std::uint8_t>(byte_dist(rng));
    return b;
  };

  // Resolve per-section content up front; lengths drive the layout.
  std::vector<SectionSpec> secs = spec.sections;
  if (secs.empty()) {
    secs.resize(spec.num_sections);
    for (std::size_t i = 0; i < secs.size(); ++i) {
      secs[i].name = i == 0 ? ".text" : ".data";
      secs[i].content_len = 1024;
    }
  }
  std::vector<Bytes> contents;
  contents.reserve(secs.size());
  for (const auto& s : secs) {
    Bytes c = s.content.empty() ? random_bytes(s.content_len) : s.content;
    if (c.empty()) {
      raise(Errc::inconsistent_spec, "section content must be non-empty");
    }
    if (s.name.size() > 8) {
      raise(Errc::inconsistent_spec, "section name longer than 8 bytes");
    }
    contents.push_back(std::move(c));
  }

  const std::size_t opt_size = spec.pe64 ? kOptSizePe32Plus : kOptSizePe32;
  const std::size_t table_off = spec.header_offset + 4 + kCoffHeaderSize + opt_size;
  const std::size_t table_end = table_off + secs.size() * kSectionHeaderSize;
  const std::uint32_t size_of_headers = static_cast<std::uint32_t>(
      align_up(table_end + spec.extra_header_space, fa));

  struct Placed {
    std::uint32_t raw_ptr, raw_size, va, vsize;
  };
  std::vector<Placed> placed(secs.size());
  std::uint32_t raw = size_of_headers;
  std::uint32_t va = static_cast<std::uint32_t>(align_up(size_of_headers, sa));
  for (std::size_t i = 0; i < secs.size(); ++i) {
    Placed pl;
    pl.raw_ptr = raw;
    pl.raw_size = static_cast<std::uint32_t>(align_up(contents[i].size(), fa));
    pl.va = va;
    pl.vsize = secs[i].virtual_size.value_or(
        static_cast<std::uint32_t>(contents[i].size()));
    raw += pl.raw_size;
    va = static_cast<std::uint32_t>(
        align_up(pl.va + std::max<std::uint32_t>(pl.vsize, 1), sa));
    placed[i] = pl;
  }
  const std::uint32_t size_of_image =
      secs.empty() ? static_cast<std::uint32_t>(sa) : va;

  Bytes out(static_cast<std::size_t>(raw) + spec.overlay_len, 0);

  write_u16(out, 0, kDosMagic);
  if (spec.header_offset > kDosHeaderSize) {
    Bytes stub = random_bytes(spec.header_offset - kDosHeaderSize);
    std::copy(stub.begin(), stub.end(), out.begin() + kDosHeaderSize);
  }
  write_u32(out, kHeaderOffsetField, spec.header_offset);

  const std::size_t sig = spec.header_offset;
  write_u32(out, sig, kPeSignature);
  const std::size_t coff = sig + 4;
  write_u16(out, coff, spec.pe64 ? 0x8664 : 0x014C);  // machine
  write_u16(out, coff + kCoffNumSections,
            static_cast<std::uint16_t>(secs.size()));
  write_u16(out, coff + kCoffSizeOfOptional,
            static_cast<std::uint16_t>(opt_size));
  write_u16(out, coff + 18, spec.pe64 ? 0x0022 : 0x0102);  // characteristics

  const std::size_t opt = coff + kCoffHeaderSize;
  write_u16(out, opt, spec.pe64 ? kOptMagicPe32Plus : kOptMagicPe32);
  out[opt + 2] = 14;  // linker major, cosmetic
  if (!placed.empty()) {
    write_u32(out, opt + 4, placed[0].raw_size);       // SizeOfCode
    write_u32(out, opt + kOptEntryPoint, placed[0].va);
    write_u32(out, opt + 20, placed[0].va);            // BaseOfCode
  }
  if (spec.pe64) {
    write_u32(out, opt + 24, 0x00000000);
    write_u32(out, opt + 28, 0x00000001);  // image base 0x1'00000000
  } else {
    write_u32(out, opt + 28, 0x00400000);
  }
  write_u32(out, opt + kOptSectionAlignment, sa);
  write_u32(out, opt + kOptFileAlignment, fa);
  write_u16(out, opt + 40, 6);  // os major
  write_u16(out, opt + 48, 6);  // subsystem major
  write_u32(out, opt + kOptSizeOfImage, size_of_image);
  write_u32(out, opt + kOptSizeOfHeaders, size_of_headers);
  write_u16(out, opt + 68, 3);  // console subsystem
  const std::size_t stack_off = opt + 72;
  if (spec.pe64) {
    write_u32(out, stack_off, 0x100000);       // stack reserve
    write_u32(out, stack_off + 8, 0x1000);     // stack commit
    write_u32(out, stack_off + 16, 0x100000);  // heap reserve
    write_u32(out, stack_off + 24, 0x1000);    // heap commit
    write_u32(out, opt + kOptRvaCountPe32Plus, kNumDataDirs);
  } else {
    write_u32(out, stack_off, 0x100000);
    write_u32(out, stack_off + 4, 0x1000);
    write_u32(out, stack_off + 8, 0x100000);
    write_u32(out, stack_off + 12, 0x1000);
    write_u32(out, opt + kOptRvaCountPe32, kNumDataDirs);
  }
  // All 16 data directories stay zero: no imports, no certificate.

  for (std::size_t i = 0; i < secs.size(); ++i) {
    const std::size_t e = table_off + i * kSectionHeaderSize;
    for (std::size_t k = 0; k < secs[i].name.size() && k < 8; ++k) {
      out[e + k] = static_cast<std::uint8_t>(secs[i].name[k]);
    }
    write_u32(out, e + kSecVirtualSize, placed[i].vsize);
    write_u32(out, e + kSecVirtualAddress, placed[i].va);
    write_u32(out, e + kSecRawSize, placed[i].raw_size);
    write_u32(out, e + kSecRawPointer, placed[i].raw_ptr);
    write_u32(out, e + kSecCharacteristics, secs[i].characteristics);
    std::copy(contents[i].begin(), contents[i].end(),
              out.begin() + placed[i].raw_ptr);
  }

  if (spec.overlay_len > 0) {
    Bytes ov = random_bytes(spec.overlay_len);
    std::copy(ov.begin(), ov.end(), out.end() - spec.overlay_len);
  }
  return out;
}

SynthSpec parse_synth_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("builder spec is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"num_sections", "file_alignment", "section_alignment",
              "sections", "overlay_len", "seed", "header_offset",
              "extra_header_space", "pe64"},
             "builder spec");
  SynthSpec s;
  try {
    s.num_sections = j.value("num_sections", 1u);
    s.file_alignment = j.value("file_alignment", 512u);
    s.section_alignment = j.value("section_alignment", 4096u);
    s.overlay_len = j.value("overlay_len", std::size_t{0});
    s.seed = j.value("seed", std::uint64_t{0});
    s.header_offset = j.value("header_offset", 0x40u);
    s.extra_header_space = j.value("extra_header_space", std::size_t{0});
    s.pe64 = j.value("pe64", false);
    if (j.contains("sections")) {
      for (const auto& js : j.at("sections")) {
        check_keys(js, {"name", "content_len", "virtual_size", "characteristics"},
                   "builder section");
        SectionSpec sec;
        sec.name = js.value("name", std::string(".data"));
        sec.content_len = js.value("content_len", std::size_t{0});
        if (js.contains("virtual_size")) {
          sec.virtual_size = js.at("virtual_size").get<std::uint32_t>();
        }
        sec.characteristics = js.value("characteristics", 0xC0000040u);
        s.sections.push_back(std::move(sec));
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("bad builder spec value: ") + e.what());
  }
  return s;
}

}  // namespace pevade::pe
