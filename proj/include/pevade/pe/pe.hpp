#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pevade/bytes.hpp"
#include "pevade/error.hpp"

namespace pevade::pe {

struct SectionEntry {
  std::array<std::uint8_t, 8> name{};
  std::uint32_t virtual_size = 0;
  std::uint32_t virtual_address = 0;
  std::uint32_t raw_size = 0;
  std::uint32_t raw_pointer = 0;
  std::uint32_t characteristics = 0;
  std::size_t entry_offset = 0;  // file offset of this table entry

  std::string name_str() const;
  std::size_t raw_end() const {
    return static_cast<std::size_t>(raw_pointer) + raw_size;
  }
  /// Bytes of the section the loader actually maps from disk.
  std::size_t content_size() const {
    return std::min<std::size_t>(virtual_size, raw_size);
  }
};

/// Structured view over a PE buffer. Parsing is read-only; fields not modeled
/// here (imports, relocations, ...) stay opaque in the underlying bytes.
struct ParsedPe {
  std::uint16_t dos_magic = 0;
  std::uint32_t header_offset = 0;  // e_lfanew
  bool pe64 = false;
  std::uint16_t size_of_optional_header = 0;
  std::uint32_t entry_point = 0;
  std::uint32_t file_alignment = 0;
  std::uint32_t section_alignment = 0;
  std::uint32_t size_of_headers = 0;
  std::uint32_t size_of_image = 0;
  std::uint16_t num_sections = 0;
  std::vector<SectionEntry> sections;
  ByteInterval overlay;  // [max raw end, file length)
  bool has_certificate = false;
  std::size_t file_size = 0;

  std::size_t coff_offset() const { return header_offset + 4; }
  std::size_t optional_offset() const { return coff_offset() + 20; }
  std::size_t section_table_offset() const {
    return optional_offset() + size_of_optional_header;
  }
  std::size_t section_table_end() const {
    return section_table_offset() +
           static_cast<std::size_t>(num_sections) * 40;
  }
  /// Spare header bytes available for additional section table entries.
  std::size_t header_room() const {
    return size_of_headers > section_table_end()
               ? size_of_headers - section_table_end()
               : 0;
  }
};

struct Violation {
  std::string rule;
  std::string message;
  std::size_t offset = 0;
};

struct ValidationReport {
  bool ok = false;
  std::vector<Violation> violations;
};

/// Smallest multiple of `alignment` that is >= value. Alignment must be a
/// nonzero power of two.
std::uint64_t align_up(std::uint64_t value, std::uint64_t alignment);

/// Structural parse. Throws Error(bad_dos_magic | truncated_file |
/// bad_header_offset | bad_alignment); never mutates the input.
ParsedPe parse(const Bytes& bytes);

/// Re-encodes every modeled field of `p` into a copy of `base`. For a buffer
/// the validator accepts, serialize(parse(b), b) == b.
Bytes serialize(const ParsedPe& p, const Bytes& base);

/// Full invariant check. Reports instead of throwing; safe on arbitrary input.
ValidationReport validate(const Bytes& bytes);

/// Per-section gap between the loader-mapped content and the aligned raw end:
/// [raw_pointer + min(virtual_size, raw_size), raw_pointer + raw_size).
/// Sorted, disjoint, in-bounds; empty gaps are skipped.
std::vector<ByteInterval> locate_slack(const ParsedPe& p, const Bytes& bytes);

/// Trailing bytes no header points to: [max section raw end, file length).
ByteInterval locate_overlay(const ParsedPe& p, const Bytes& bytes);

}  // namespace pevade::pe
