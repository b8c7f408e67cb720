#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "pevade/attack/genetic.hpp"
#include "pevade/manip/manipulations.hpp"
#include "pevade/model/classifier.hpp"
#include "pevade/sample.hpp"

namespace pevade {

enum class GammaMode { padding, section_injection };

/// Benign-content injection attack: the genome holds one inclusion fraction
/// per harvested payload, and the fitness adds a size penalty so candidates
/// do not grow unbounded: score + lambda * injected_bytes.
struct GammaConfig {
  double lambda = 1e-5;
  std::vector<SectionPayload> payloads;
  GammaMode mode = GammaMode::padding;
  bool binary_inclusion = false;  // decode genes as {0,1} at 0.5 instead
};

/// Pulls up to max_count sections whose name matches the filter out of the
/// PE files under goodware_dir. Order is deterministic: lexicographic by
/// file name, then section index. Files that fail to parse are skipped.
std::vector<SectionPayload> harvest_sections(
    const std::filesystem::path& goodware_dir,
    std::string_view section_name_filter, std::size_t max_count);

struct GammaCandidate {
  Bytes bytes;
  std::uint64_t injected_bytes = 0;
};

/// Builds the candidate a genome describes (without scoring it).
GammaCandidate gamma_build(const Bytes& sample, const Genome& genes,
                           const GammaConfig& cfg);

/// Scores one candidate; exactly one classifier query.
EvalOutcome gamma_fitness(const RawExe& sample, const Genome& genes,
                          const Classifier& model, const GammaConfig& cfg);

AttackTrace run_gamma(const RawExe& sample, const Classifier& model,
                      const GammaConfig& gcfg, const GeneticConfig& cfg);

// Payload store: a directory of raw .bin files plus index.json with one
// record per payload: {file, source_sample, section_name, length}.
void save_payloads(const std::filesystem::path& dir,
                   const std::vector<SectionPayload>& payloads);
std::vector<SectionPayload> load_payloads(const std::filesystem::path& dir);

}  // namespace pevade
