#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pevade/bytes.hpp"

namespace pevade::pe {

struct SectionSpec {
  std::string name = ".data";
  Bytes content;                  // explicit content wins over content_len
  std::size_t content_len = 0;    // generated from the builder seed
  std::optional<std::uint32_t> virtual_size;  // default: content length
  std::uint32_t characteristics = 0xC0000040;  // initialized data, r/w
};

/// Deterministic builder description for a synthetic PE. The JSON form is
/// documented in the README (keys: num_sections, file_alignment,
/// section_alignment, sections[], overlay_len, seed; optional header_offset,
/// extra_header_space, pe64).
struct SynthSpec {
  unsigned num_sections = 1;
  std::uint32_t file_alignment = 512;
  std::uint32_t section_alignment = 4096;
  std::vector<SectionSpec> sections;  // empty: default sections are generated
  std::size_t overlay_len = 0;
  std::uint32_t header_offset = 0x40;   // e_lfanew; stub bytes fill [0x40, here)
  std::size_t extra_header_space = 0;   // zero bytes reserved past the table
  bool pe64 = false;
  std::uint64_t seed = 0;
};

/// Emits a file that parses back to the spec and passes validate().
/// Deterministic for a fixed spec (the seed is part of the spec).
/// Throws Error(inconsistent_spec) on contradictory descriptions.
Bytes synth_pe(const SynthSpec& spec);

SynthSpec parse_synth_spec(const std::string& json_text);

}  // namespace pevade::pe
