#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pevade/sample.hpp"

namespace pevade {

/// Class-conditional byte distribution for section content: mixture weights
/// over zero bytes, printable ASCII, the high half [0x80,0xFF], and uniform
/// noise. The two defaults below are deliberately far apart so the synthetic
/// classes are separable by construction.
struct ByteProfile {
  double zero = 0.25;
  double printable = 0.60;
  double high = 0.0;
  double uniform = 0.15;
};

inline ByteProfile benign_profile() { return {0.25, 0.60, 0.00, 0.15}; }
inline ByteProfile malicious_profile() { return {0.10, 0.00, 0.70, 0.20}; }

struct CorpusSpec {
  int per_class = 100;
  std::uint32_t file_alignment = 512;
  std::uint32_t section_alignment = 4096;
  int min_sections = 1;
  int max_sections = 3;
  std::size_t min_content = 1500;
  std::size_t max_content = 6000;
  std::uint32_t header_offset = 0x80;  // keeps a DOS stub for the dos attacks
  std::size_t max_overlay = 256;
  std::size_t extra_header_space = 0;
  ByteProfile benign = benign_profile();
  ByteProfile malicious = malicious_profile();
};

struct DatasetEntry {
  std::filesystem::path path;
  Label label = Label::benign;
};

/// Writes per_class valid PEs per label under out_dir (benign/, malicious/)
/// plus manifest.json ([{path,label}...]). Deterministic per (spec, seed);
/// per-sample bytes depend only on the master seed, class and index.
std::vector<DatasetEntry> make_corpus(const CorpusSpec& spec,
                                      std::uint64_t seed,
                                      const std::filesystem::path& out_dir);

/// Generate one sample's bytes without touching the filesystem.
Bytes make_sample(const CorpusSpec& spec, Label label, std::uint64_t seed);

CorpusSpec parse_corpus_spec(const std::string& json_text);

std::vector<RawExe> load_dataset(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest,
                    const std::vector<DatasetEntry>& entries);

}  // namespace pevade
