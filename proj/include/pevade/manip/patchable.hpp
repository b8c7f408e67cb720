#pragma once

#include <string>
#include <vector>

#include "pevade/bytes.hpp"

namespace pevade {

struct Origin {
  std::string manipulation;
  std::string params;
};

/// A rewritten buffer plus the exact attacker-controllable byte ranges.
/// Construction enforces: intervals sorted, disjoint, in-bounds, never
/// covering the DOS magic [0,2) or the header-offset field [0x3C,0x40),
/// and the buffer passing validate().
class Patchable {
 public:
  static Patchable create(Bytes bytes, std::vector<ByteInterval> editable,
                          Origin origin);

  const Bytes& bytes() const { return bytes_; }
  const std::vector<ByteInterval>& editable() const { return editable_; }
  const Origin& origin() const { return origin_; }

  std::size_t editable_length() const { return total_length(editable_); }

  /// Editable offsets, flattened in ascending order.
  std::vector<std::size_t> editable_offsets() const;

  /// Current contents of the editable ranges, concatenated in order.
  Bytes region_contents() const;

 private:
  Patchable() = default;
  Bytes bytes_;
  std::vector<ByteInterval> editable_;
  Origin origin_;
};

/// Writes `values` (one byte per editable position, in order) into a copy of
/// p's buffer. Throws Error(length_mismatch) when sizes disagree.
Bytes apply_bytes(const Patchable& p, const Bytes& values);

/// Merges the editable sets of two sequentially-applied rewrites of the same
/// underlying file; b must be the later one. Throws Error(overlap) when the
/// interval sets intersect.
Patchable combine(const Patchable& a, const Patchable& b);

}  // namespace pevade
