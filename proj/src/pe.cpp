#include "pevade/pe/pe.hpp"

#include <algorithm>
#include <fstream>

#include "pevade/pe/format.hpp"

namespace pevade {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::bad_dos_magic: return "BadDosMagic";
    case Errc::truncated_file: return "TruncatedFile";
    case Errc::bad_header_offset: return "BadHeaderOffset";
    case Errc::bad_alignment: return "BadAlignment";
    case Errc::zero_alignment: return "ZeroAlignment";
    case Errc::inconsistent_spec: return "InconsistentSpec";
    case Errc::invalid_input: return "InvalidInput";
    case Errc::misaligned_amount: return "MisalignedAmount";
    case Errc::header_budget_exceeded: return "HeaderBudgetExceeded";
    case Errc::no_header_room: return "NoHeaderRoom";
    case Errc::overlap: return "OverlapError";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::position_out_of_range: return "PositionOutOfRange";
    case Errc::degenerate_dataset: return "DegenerateDataset";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::not_differentiable: return "NotDifferentiable";
    case Errc::no_editable_bytes: return "NoEditableBytesInWindow";
    case Errc::budget_too_small: return "BudgetTooSmall";
    case Errc::no_payloads_found: return "NoPayloadsFound";
    case Errc::io_error: return "IoError";
    case Errc::config_error: return "ConfigError";
  }
  return "Error";
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)),
             std::istreambuf_iterator<char>());
  if (in.bad()) raise(Errc::io_error, "read failed for " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, const Bytes& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) raise(Errc::io_error, "write failed for " + path.string());
}

}  // namespace pevade

namespace pevade::pe {

namespace {

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

void need(bool ok, std::size_t end, std::size_t len) {
  if (!ok || end > len) {
    raise(Errc::truncated_file, "field at [.., " + std::to_string(end) +
                                    ") exceeds buffer of " +
                                    std::to_string(len) + " bytes");
  }
}

}  // namespace

std::string SectionEntry::name_str() const {
  std::string s;
  for (auto c : name) {
    if (c == 0) break;
    s.push_back(static_cast<char>(c));
  }
  return s;
}

std::uint64_t align_up(std::uint64_t value, std::uint64_t alignment) {
  if (alignment == 0) raise(Errc::zero_alignment, "alignment must be nonzero");
  if (!is_pow2(alignment)) {
    raise(Errc::bad_alignment,
          "alignment " + std::to_string(alignment) + " is not a power of two");
  }
  return (value + alignment - 1) & ~(alignment - 1);
}

ParsedPe parse(const Bytes& bytes) {
  const std::size_t len = bytes.size();
  if (len < 2) raise(Errc::truncated_file, "buffer shorter than the DOS magic");

  ParsedPe p;
  p.file_size = len;
  p.dos_magic = read_u16(bytes, 0);
  if (p.dos_magic != kDosMagic) {
    raise(Errc::bad_dos_magic, "first two bytes are not MZ");
  }

  need(true, kDosHeaderSize, len);
  p.header_offset = read_u32(bytes, kHeaderOffsetField);
  if (p.header_offset < kDosHeaderSize) {
    raise(Errc::bad_header_offset,
          "e_lfanew " + std::to_string(p.header_offset) + " is below 0x40");
  }
  // Minimal header: signature + COFF + the optional-header magic.
  if (static_cast<std::size_t>(p.header_offset) + kPeSignatureSize +
          kCoffHeaderSize + 2 >
      len) {
    raise(Errc::bad_header_offset, "e_lfanew points past the end of the file");
  }

  if (read_u32(bytes, p.header_offset) != kPeSignature) {
    raise(Errc::bad_header_offset, "no PE signature at e_lfanew");
  }

  const std::size_t coff = p.coff_offset();
  p.num_sections = read_u16(bytes, coff + kCoffNumSections);
  p.size_of_optional_header = read_u16(bytes, coff + kCoffSizeOfOptional);

  const std::size_t opt = p.optional_offset();
  const std::uint16_t opt_magic = read_u16(bytes, opt);
  if (opt_magic == kOptMagicPe32) {
    p.pe64 = false;
  } else if (opt_magic == kOptMagicPe32Plus) {
    p.pe64 = true;
  } else {
    raise(Errc::bad_header_offset, "unknown optional header magic");
  }
  const std::size_t opt_min = p.pe64 ? kOptRvaCountPe32Plus + 4
                                     : kOptRvaCountPe32 + 4;
  if (p.size_of_optional_header < opt_min) {
    raise(Errc::truncated_file, "optional header smaller than its fixed part");
  }
  need(true, opt + p.size_of_optional_header, len);

  p.entry_point = read_u32(bytes, opt + kOptEntryPoint);
  p.section_alignment = read_u32(bytes, opt + kOptSectionAlignment);
  p.file_alignment = read_u32(bytes, opt + kOptFileAlignment);
  p.size_of_image = read_u32(bytes, opt + kOptSizeOfImage);
  p.size_of_headers = read_u32(bytes, opt + kOptSizeOfHeaders);
  if (!is_pow2(p.file_alignment) || !is_pow2(p.section_alignment)) {
    raise(Errc::bad_alignment, "alignments must be powers of two");
  }

  const std::uint32_t rva_count =
      read_u32(bytes, opt + (p.pe64 ? kOptRvaCountPe32Plus : kOptRvaCountPe32));
  const std::size_t dirs = opt + (p.pe64 ? kOptDirsPe32Plus : kOptDirsPe32);
  if (rva_count > kSecurityDirIndex &&
      dirs + (kSecurityDirIndex + 1) * kDataDirEntrySize <=
          opt + p.size_of_optional_header) {
    const std::size_t sec = dirs + kSecurityDirIndex * kDataDirEntrySize;
    p.has_certificate =
        read_u32(bytes, sec) != 0 || read_u32(bytes, sec + 4) != 0;
  }

  const std::size_t table = p.section_table_offset();
  need(true, table + static_cast<std::size_t>(p.num_sections) * 40, len);
  p.sections.reserve(p.num_sections);
  for (std::size_t i = 0; i < p.num_sections; ++i) {
    const std::size_t e = table + i * kSectionHeaderSize;
    SectionEntry s;
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(e), 8,
                s.name.begin());
    s.virtual_size = read_u32(bytes, e + kSecVirtualSize);
    s.virtual_address = read_u32(bytes, e + kSecVirtualAddress);
    s.raw_size = read_u32(bytes, e + kSecRawSize);
    s.raw_pointer = read_u32(bytes, e + kSecRawPointer);
    s.characteristics = read_u32(bytes, e + kSecCharacteristics);
    s.entry_offset = e;
    if (s.raw_size > 0) need(true, s.raw_end(), len);
    p.sections.push_back(s);
  }

  std::size_t overlay_start = p.section_table_end();
  if (overlay_start < p.size_of_headers) overlay_start = p.size_of_headers;
  for (const auto& s : p.sections) {
    if (s.raw_size > 0) overlay_start = std::max(overlay_start, s.raw_end());
  }
  p.overlay = ByteInterval{std::min(overlay_start, len), len};
  return p;
}

Bytes serialize(const ParsedPe& p, const Bytes& base) {
  Bytes out = base;
  need(true, p.section_table_end(), out.size());
  write_u16(out, 0, p.dos_magic);
  write_u32(out, kHeaderOffsetField, p.header_offset);
  const std::size_t coff = p.coff_offset();
  write_u16(out, coff + kCoffNumSections, p.num_sections);
  write_u16(out, coff + kCoffSizeOfOptional, p.size_of_optional_header);
  const std::size_t opt = p.optional_offset();
  write_u16(out, opt, p.pe64 ? kOptMagicPe32Plus : kOptMagicPe32);
  write_u32(out, opt + kOptEntryPoint, p.entry_point);
  write_u32(out, opt + kOptSectionAlignment, p.section_alignment);
  write_u32(out, opt + kOptFileAlignment, p.file_alignment);
  write_u32(out, opt + kOptSizeOfImage, p.size_of_image);
  write_u32(out, opt + kOptSizeOfHeaders, p.size_of_headers);
  for (std::size_t i = 0; i < p.sections.size(); ++i) {
    const auto& s = p.sections[i];
    const std::size_t e = p.section_table_offset() + i * kSectionHeaderSize;
    std::copy(s.name.begin(), s.name.end(),
              out.begin() + static_cast<std::ptrdiff_t>(e));
    write_u32(out, e + kSecVirtualSize, s.virtual_size);
    write_u32(out, e + kSecVirtualAddress, s.virtual_address);
    write_u32(out, e + kSecRawSize, s.raw_size);
    write_u32(out, e + kSecRawPointer, s.raw_pointer);
    write_u32(out, e + kSecCharacteristics, s.characteristics);
  }
  return out;
}

ValidationReport validate(const Bytes& bytes) {
  ValidationReport rep;
  auto flag = [&rep](std::string rule, std::string msg, std::size_t off) {
    rep.violations.push_back({std::move(rule), std::move(msg), off});
  };

  ParsedPe p;
  try {
    p = parse(bytes);
  } catch (const Error& e) {
    switch (e.code()) {
      case Errc::bad_dos_magic: flag("dos-magic", e.what(), 0); break;
      case Errc::bad_header_offset:
        flag("header-offset", e.what(), kHeaderOffsetField);
        break;
      case Errc::bad_alignment: flag("alignment", e.what(), 0); break;
      default: flag("truncated", e.what(), 0); break;
    }
    rep.ok = false;
    return rep;
  } catch (const std::exception& e) {
    flag("truncated", e.what(), 0);
    rep.ok = false;
    return rep;
  }

  if (p.section_alignment < p.file_alignment) {
    flag("alignment",
         "section alignment below file alignment", p.optional_offset() + 32);
  }
  if (p.size_of_headers < p.section_table_end()) {
    flag("headers-bound", "size_of_headers does not cover the section table",
         p.optional_offset() + 60);
  }
  for (std::size_t i = 0; i < p.sections.size(); ++i) {
    const auto& s = p.sections[i];
    if (s.raw_size == 0) continue;  // no on-disk presence
    if (s.raw_pointer % p.file_alignment != 0 ||
        s.raw_size % p.file_alignment != 0) {
      flag("raw-alignment",
           "section " + std::to_string(i) + " raw fields not aligned",
           s.entry_offset);
    }
    if (s.virtual_address % p.section_alignment != 0) {
      flag("va-alignment",
           "section " + std::to_string(i) + " virtual address not aligned",
           s.entry_offset);
    }
    if (s.raw_pointer < p.size_of_headers) {
      flag("section-bounds",
           "section " + std::to_string(i) + " raw data inside headers",
           s.entry_offset);
    }
    for (std::size_t j = i + 1; j < p.sections.size(); ++j) {
      const auto& t = p.sections[j];
      if (t.raw_size == 0) continue;
      if (s.raw_pointer < t.raw_end() && t.raw_pointer < s.raw_end()) {
        flag("section-overlap",
             "sections " + std::to_string(i) + " and " + std::to_string(j) +
                 " overlap on disk",
             t.entry_offset);
      }
    }
  }
  if (!p.sections.empty()) {
    std::uint32_t first_va = p.sections.front().virtual_address;
    for (const auto& s : p.sections) first_va = std::min(first_va, s.virtual_address);
    if (p.size_of_headers > first_va) {
      flag("headers-bound", "size_of_headers exceeds the first section rva",
           p.optional_offset() + 60);
    }
  }
  if (p.has_certificate) {
    flag("signed-binary",
         "certificate directory present; rewriting would break the signature",
         0);
  }

  rep.ok = rep.violations.empty();
  return rep;
}

std::vector<ByteInterval> locate_slack(const ParsedPe& p, const Bytes& bytes) {
  std::vector<ByteInterval> out;
  for (const auto& s : p.sections) {
    if (s.raw_size == 0) continue;
    const std::size_t lo = s.raw_pointer + s.content_size();
    const std::size_t hi = std::min(s.raw_end(), bytes.size());
    if (lo < hi) out.push_back({lo, hi});
  }
  std::sort(out.begin(), out.end(),
            [](const ByteInterval& a, const ByteInterval& b) {
              return a.begin < b.begin;
            });
  return out;
}

ByteInterval locate_overlay(const ParsedPe& p, const Bytes& bytes) {
  std::size_t start = p.section_table_end();
  if (start < p.size_of_headers) start = p.size_of_headers;
  for (const auto& s : p.sections) {
    if (s.raw_size > 0) start = std::max(start, s.raw_end());
  }
  start = std::min(start, bytes.size());
  return {start, bytes.size()};
}

}  // namespace pevade::pe
