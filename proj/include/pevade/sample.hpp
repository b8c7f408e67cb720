#pragma once

#include <string>

#include "pevade/bytes.hpp"

namespace pevade {

enum class Label { benign, malicious };

inline const char* label_name(Label l) {
  return l == Label::benign ? "benign" : "malicious";
}

/// An ingested program: immutable bytes plus provenance. The label is fixed
/// at ingestion and never re-derived.
struct RawExe {
  Bytes bytes;
  std::string sample_id;
  Label label = Label::benign;
};

}  // namespace pevade
