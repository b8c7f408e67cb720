#include "pevade/manip/patchable.hpp"

#include <algorithm>

#include "pevade/error.hpp"
#include "pevade/pe/format.hpp"
#include "pevade/pe/pe.hpp"

namespace pevade {

Patchable Patchable::create(Bytes bytes, std::vector<ByteInterval> editable,
                            Origin origin) {
  std::erase_if(editable, [](const ByteInterval& iv) { return iv.empty(); });
  std::sort(editable.begin(), editable.end(),
            [](const ByteInterval& a, const ByteInterval& b) {
              return a.begin < b.begin;
            });
  if (!sorted_disjoint(editable)) {
    raise(Errc::overlap, "editable intervals intersect");
  }
  const ByteInterval magic{0, 2};
  const ByteInterval lfanew{pe::kHeaderOffsetField, pe::kHeaderOffsetField + 4};
  for (const auto& iv : editable) {
    if (iv.end > bytes.size()) {
      raise(Errc::invalid_input, "editable interval out of bounds");
    }
    if (iv.overlaps(magic) || iv.overlaps(lfanew)) {
      raise(Errc::invalid_input,
            "editable interval covers the DOS magic or e_lfanew");
    }
  }
  auto rep = pe::validate(bytes);
  if (!rep.ok) {
    raise(Errc::invalid_input,
          "buffer fails validation: " + rep.violations.front().rule);
  }
  Patchable p;
  p.bytes_ = std::move(bytes);
  p.editable_ = std::move(editable);
  p.origin_ = std::move(origin);
  return p;
}

std::vector<std::size_t> Patchable::editable_offsets() const {
  std::vector<std::size_t> offs;
  offs.reserve(editable_length());
  for (const auto& iv : editable_) {
    for (std::size_t o = iv.begin; o < iv.end; ++o) offs.push_back(o);
  }
  return offs;
}

Bytes Patchable::region_contents() const {
  Bytes out;
  out.reserve(editable_length());
  for (const auto& iv : editable_) {
    out.insert(out.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(iv.begin),
               bytes_.begin() + static_cast<std::ptrdiff_t>(iv.end));
  }
  return out;
}

Bytes apply_bytes(const Patchable& p, const Bytes& values) {
  if (values.size() != p.editable_length()) {
    raise(Errc::length_mismatch,
          "got " + std::to_string(values.size()) + " bytes for " +
              std::to_string(p.editable_length()) + " editable positions");
  }
  Bytes out = p.bytes();
  std::size_t cursor = 0;
  for (const auto& iv : p.editable()) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(cursor), iv.size(),
                out.begin() + static_cast<std::ptrdiff_t>(iv.begin));
    cursor += iv.size();
  }
  return out;
}

Patchable combine(const Patchable& a, const Patchable& b) {
  std::vector<ByteInterval> merged = a.editable();
  merged.insert(merged.end(), b.editable().begin(), b.editable().end());
  std::sort(merged.begin(), merged.end(),
            [](const ByteInterval& x, const ByteInterval& y) {
              return x.begin < y.begin;
            });
  if (!sorted_disjoint(merged)) {
    raise(Errc::overlap, "combined editable intervals intersect");
  }
  Origin origin{a.origin().manipulation + "+" + b.origin().manipulation,
                a.origin().params + ";" + b.origin().params};
  return Patchable::create(b.bytes(), std::move(merged), std::move(origin));
}

}  // namespace pevade
