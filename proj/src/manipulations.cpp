#include "pevade/manip/manipulations.hpp"

#include <algorithm>
#include <cmath>

#include "pevade/error.hpp"
#include "pevade/pe/format.hpp"
#include "pevade/pe/pe.hpp"

namespace pevade {

namespace {

using pe::ParsedPe;

ParsedPe checked_parse(const Bytes& bytes) {
  auto rep = pe::validate(bytes);
  if (!rep.ok) {
    raise(Errc::invalid_input,
          "input fails validation: " + rep.violations.front().rule + " (" +
              rep.violations.front().message + ")");
  }
  return pe::parse(bytes);
}

void check_amount(const ParsedPe& p, std::uint32_t amount) {
  if (amount == 0 || amount % p.file_alignment != 0) {
    raise(Errc::misaligned_amount,
          "amount " + std::to_string(amount) +
              " is not a positive multiple of file alignment " +
              std::to_string(p.file_alignment));
  }
}

std::uint32_t min_virtual_address(const ParsedPe& p) {
  std::uint32_t va = UINT32_MAX;
  for (const auto& s : p.sections) va = std::min(va, s.virtual_address);
  return va;
}

void check_header_budget(const ParsedPe& p, std::uint32_t new_soh) {
  if (!p.sections.empty() && new_soh > min_virtual_address(p)) {
    raise(Errc::header_budget_exceeded,
          "size_of_headers " + std::to_string(new_soh) +
              " would exceed the first section rva");
  }
}

Bytes insert_zeros(const Bytes& bytes, std::size_t at, std::size_t count) {
  Bytes out;
  out.reserve(bytes.size() + count);
  out.insert(out.end(), bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(at));
  out.insert(out.end(), count, 0);
  out.insert(out.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at), bytes.end());
  return out;
}

void bump_raw_pointers(Bytes& out, const ParsedPe& p, std::size_t table_off,
                       std::uint32_t amount) {
  for (std::size_t i = 0; i < p.sections.size(); ++i) {
    const auto& s = p.sections[i];
    if (s.raw_size == 0) continue;
    write_u32(out, table_off + i * pe::kSectionHeaderSize + pe::kSecRawPointer,
              s.raw_pointer + amount);
  }
}

}  // namespace

Patchable partial_dos(const Bytes& bytes) {
  checked_parse(bytes);
  return Patchable::create(bytes, {{2, pe::kHeaderOffsetField}},
                           {"partial_dos", ""});
}

Patchable full_dos(const Bytes& bytes) {
  auto p = checked_parse(bytes);
  std::vector<ByteInterval> regions{{2, pe::kHeaderOffsetField}};
  if (p.header_offset > pe::kDosHeaderSize) {
    regions.push_back({pe::kDosHeaderSize, p.header_offset});
  }
  return Patchable::create(bytes, std::move(regions), {"full_dos", ""});
}

Patchable extend(const Bytes& bytes, std::uint32_t amount) {
  auto p = checked_parse(bytes);
  check_amount(p, amount);
  const std::uint64_t new_lfanew =
      static_cast<std::uint64_t>(p.header_offset) + amount;
  if (new_lfanew > UINT32_MAX) {
    raise(Errc::invalid_input, "extended header offset overflows 32 bits");
  }
  const std::uint32_t new_soh = p.size_of_headers + amount;
  check_header_budget(p, new_soh);

  const std::size_t old = p.header_offset;
  Bytes out = insert_zeros(bytes, old, amount);
  write_u32(out, pe::kHeaderOffsetField, static_cast<std::uint32_t>(new_lfanew));
  const std::size_t opt = new_lfanew + 4 + pe::kCoffHeaderSize;
  write_u32(out, opt + pe::kOptSizeOfHeaders, new_soh);
  bump_raw_pointers(out, p, opt + p.size_of_optional_header, amount);

  return Patchable::create(std::move(out), {{old, old + amount}},
                           {"extend", "amount=" + std::to_string(amount)});
}

Patchable shift(const Bytes& bytes, std::uint32_t amount) {
  auto p = checked_parse(bytes);
  check_amount(p, amount);
  std::uint32_t first_raw = UINT32_MAX;
  for (const auto& s : p.sections) {
    if (s.raw_size > 0) first_raw = std::min(first_raw, s.raw_pointer);
  }
  if (first_raw == UINT32_MAX) {
    raise(Errc::invalid_input, "no section raw data to shift");
  }
  const std::uint32_t new_soh = p.size_of_headers + amount;
  check_header_budget(p, new_soh);

  Bytes out = insert_zeros(bytes, first_raw, amount);
  const std::size_t opt = p.optional_offset();
  write_u32(out, opt + pe::kOptSizeOfHeaders, new_soh);
  bump_raw_pointers(out, p, p.section_table_offset(), amount);

  return Patchable::create(
      std::move(out),
      {{first_raw, static_cast<std::size_t>(first_raw) + amount}},
      {"shift", "amount=" + std::to_string(amount)});
}

Patchable padding(const Bytes& bytes, std::size_t n) {
  checked_parse(bytes);
  Bytes out = bytes;
  out.insert(out.end(), n, 0);
  std::vector<ByteInterval> regions;
  if (n > 0) regions.push_back({bytes.size(), bytes.size() + n});
  return Patchable::create(std::move(out), std::move(regions),
                           {"padding", "n=" + std::to_string(n)});
}

Patchable slack_fill(const Bytes& bytes) {
  auto p = checked_parse(bytes);
  return Patchable::create(bytes, pe::locate_slack(p, bytes),
                           {"slack_fill", ""});
}

Patchable inject_section(const Bytes& bytes, const SectionPayload& payload,
                         double fraction) {
  auto p = checked_parse(bytes);
  if (payload.content.empty()) {
    raise(Errc::invalid_input, "payload content is empty");
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    raise(Errc::invalid_input, "fraction outside [0,1]");
  }
  const auto take = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(payload.content.size())));
  if (take == 0) {
    // EmptyPayloadSlice: identity, no section added.
    return Patchable::create(bytes, {}, {"inject_section", "fraction=0"});
  }
  if (p.header_room() < pe::kSectionHeaderSize) {
    raise(Errc::no_header_room,
          "no spare header bytes for another section table entry");
  }

  const std::uint32_t raw_size =
      static_cast<std::uint32_t>(pe::align_up(take, p.file_alignment));
  const std::size_t insert_at = pe::locate_overlay(p, bytes).begin;
  std::uint32_t va_end = p.size_of_headers;
  for (const auto& s : p.sections) {
    va_end = std::max(va_end,
                      s.virtual_address + std::max<std::uint32_t>(s.virtual_size, 1));
  }
  const std::uint32_t va =
      static_cast<std::uint32_t>(pe::align_up(va_end, p.section_alignment));

  Bytes out = insert_zeros(bytes, insert_at, raw_size);
  std::copy_n(payload.content.begin(), take,
              out.begin() + static_cast<std::ptrdiff_t>(insert_at));

  const std::size_t e = p.section_table_end();
  std::copy(payload.source_name.begin(), payload.source_name.end(),
            out.begin() + static_cast<std::ptrdiff_t>(e));
  write_u32(out, e + pe::kSecVirtualSize, static_cast<std::uint32_t>(take));
  write_u32(out, e + pe::kSecVirtualAddress, va);
  write_u32(out, e + pe::kSecRawSize, raw_size);
  write_u32(out, e + pe::kSecRawPointer, static_cast<std::uint32_t>(insert_at));
  write_u32(out, e + pe::kSecCharacteristics, 0x40000040);  // r, initialized
  write_u16(out, p.coff_offset() + pe::kCoffNumSections, p.num_sections + 1);
  const std::uint32_t new_image = static_cast<std::uint32_t>(
      pe::align_up(va + take, p.section_alignment));
  write_u32(out, p.optional_offset() + pe::kOptSizeOfImage, new_image);

  return Patchable::create(std::move(out), {},
                           {"inject_section",
                            "take=" + std::to_string(take) + " from " +
                                payload.source_sample});
}

Patchable apply_manipulation(const Bytes& bytes, const ManipSpec& spec) {
  switch (spec.kind) {
    case ManipKind::partial_dos: return partial_dos(bytes);
    case ManipKind::full_dos: return full_dos(bytes);
    case ManipKind::extend: return extend(bytes, spec.amount);
    case ManipKind::shift: return shift(bytes, spec.amount);
    case ManipKind::padding: return padding(bytes, spec.pad_len);
    case ManipKind::slack_fill: return slack_fill(bytes);
    case ManipKind::slack_padding: {
      Patchable s = slack_fill(bytes);
      Patchable pad = padding(bytes, spec.pad_len);
      return combine(s, pad);
    }
  }
  raise(Errc::config_error, "unknown manipulation");
}

ManipKind manip_from_name(const std::string& name) {
  if (name == "partial_dos") return ManipKind::partial_dos;
  if (name == "full_dos") return ManipKind::full_dos;
  if (name == "extend") return ManipKind::extend;
  if (name == "shift") return ManipKind::shift;
  if (name == "padding") return ManipKind::padding;
  if (name == "slack_fill") return ManipKind::slack_fill;
  if (name == "slack_padding") return ManipKind::slack_padding;
  raise(Errc::config_error, "unknown manipulation \"" + name + "\"");
}

const char* manip_name(ManipKind kind) {
  switch (kind) {
    case ManipKind::partial_dos: return "partial_dos";
    case ManipKind::full_dos: return "full_dos";
    case ManipKind::extend: return "extend";
    case ManipKind::shift: return "shift";
    case ManipKind::padding: return "padding";
    case ManipKind::slack_fill: return "slack_fill";
    case ManipKind::slack_padding: return "slack_padding";
  }
  return "?";
}

}  // namespace pevade
