#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "pevade/manip/patchable.hpp"

namespace pevade {

/// A section harvested from a benign program, used as injection content.
struct SectionPayload {
  Bytes content;
  std::array<std::uint8_t, 8> source_name{};
  std::string source_sample;
};

// Structure-preserving rewrites. Each takes a buffer that passes validate()
// (else Error(invalid_input)) and yields the mutated buffer plus the byte
// ranges an attack may write freely.

/// Unused DOS header bytes [2, 0x3C); the buffer itself is unchanged.
Patchable partial_dos(const Bytes& bytes);

/// Adds the DOS stub [0x40, e_lfanew) on top of partial_dos. An e_lfanew of
/// 0x40 degenerates to the partial region alone.
Patchable full_dos(const Bytes& bytes);

/// Moves the real header right by `amount` (a file_alignment multiple),
/// creating an editable gap at the old header position. Section raw pointers
/// and size_of_headers grow by `amount`.
Patchable extend(const Bytes& bytes, std::uint32_t amount);

/// Inserts `amount` zero bytes in front of the first section's raw data,
/// shifting all section content right. The gap is editable.
Patchable shift(const Bytes& bytes, std::uint32_t amount);

/// Appends n zero bytes past the end of the file; no header field changes.
Patchable padding(const Bytes& bytes, std::size_t n);

/// Grants the slack ranges between each section's mapped content and its
/// aligned raw end; the buffer is unchanged.
Patchable slack_fill(const Bytes& bytes);

/// Appends a new section holding the first ceil(fraction*|content|) payload
/// bytes, zero-padded to file alignment. The content is fixed by the payload,
/// so the editable set is empty; a zero-length slice is the identity.
Patchable inject_section(const Bytes& bytes, const SectionPayload& payload,
                         double fraction);

/// Manipulation selector used by the attack engines and the campaign runner.
enum class ManipKind {
  partial_dos,
  full_dos,
  extend,
  shift,
  padding,
  slack_fill,
  slack_padding,  // slack_fill composed with padding
};

struct ManipSpec {
  ManipKind kind = ManipKind::partial_dos;
  std::uint32_t amount = 0;   // extend / shift
  std::size_t pad_len = 0;    // padding / slack_padding
};

Patchable apply_manipulation(const Bytes& bytes, const ManipSpec& spec);

ManipKind manip_from_name(const std::string& name);
const char* manip_name(ManipKind kind);

}  // namespace pevade
