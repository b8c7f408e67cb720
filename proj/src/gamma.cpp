#include "pevade/attack/gamma.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "pevade/error.hpp"
#include "pevade/pe/pe.hpp"

namespace pevade {

namespace {

double gene_fraction(double gene, bool binary) {
  if (binary) return gene >= 0.5 ? 1.0 : 0.0;
  return std::clamp(gene, 0.0, 1.0);
}

std::size_t slice_len(const SectionPayload& payload, double fraction) {
  return static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(payload.content.size())));
}

}  // namespace

std::vector<SectionPayload> harvest_sections(
    const std::filesystem::path& goodware_dir,
    std::string_view section_name_filter, std::size_t max_count) {
  if (!std::filesystem::is_directory(goodware_dir)) {
    raise(Errc::io_error, "not a directory: " + goodware_dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(goodware_dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<SectionPayload> out;
  for (const auto& path : files) {
    if (out.size() >= max_count) break;
    Bytes bytes;
    pe::ParsedPe p;
    try {
      bytes = read_file(path);
      p = pe::parse(bytes);
    } catch (const Error&) {
      continue;  // not a parseable PE; skip
    }
    for (const auto& s : p.sections) {
      if (out.size() >= max_count) break;
      if (s.raw_size == 0) continue;
      if (s.name_str() != section_name_filter) continue;
      SectionPayload payload;
      payload.content.assign(
          bytes.begin() + static_cast<std::ptrdiff_t>(s.raw_pointer),
          bytes.begin() + static_cast<std::ptrdiff_t>(s.raw_end()));
      payload.source_name = s.name;
      payload.source_sample = path.filename().string();
      out.push_back(std::move(payload));
    }
  }
  if (out.empty()) {
    raise(Errc::no_payloads_found,
          "no sections named \"" + std::string(section_name_filter) +
              "\" under " + goodware_dir.string());
  }
  return out;
}

GammaCandidate gamma_build(const Bytes& sample, const Genome& genes,
                           const GammaConfig& cfg) {
  if (cfg.lambda < 0.0) {
    raise(Errc::config_error, "the size-regularization weight must be >= 0");
  }
  if (static_cast<std::size_t>(genes.size()) != cfg.payloads.size()) {
    raise(Errc::length_mismatch,
          "genome length " + std::to_string(genes.size()) +
              " does not match " + std::to_string(cfg.payloads.size()) +
              " payloads");
  }
  GammaCandidate cand;
  if (cfg.mode == GammaMode::padding) {
    Bytes injected;
    for (std::size_t i = 0; i < cfg.payloads.size(); ++i) {
      const double frac =
          gene_fraction(genes(static_cast<Eigen::Index>(i)), cfg.binary_inclusion);
      const std::size_t take = slice_len(cfg.payloads[i], frac);
      injected.insert(injected.end(), cfg.payloads[i].content.begin(),
                      cfg.payloads[i].content.begin() +
                          static_cast<std::ptrdiff_t>(take));
    }
    const Patchable p = padding(sample, injected.size());
    cand.bytes = injected.empty() ? p.bytes() : apply_bytes(p, injected);
  } else {
    cand.bytes = sample;
    for (std::size_t i = 0; i < cfg.payloads.size(); ++i) {
      const double frac =
          gene_fraction(genes(static_cast<Eigen::Index>(i)), cfg.binary_inclusion);
      if (slice_len(cfg.payloads[i], frac) == 0) continue;
      cand.bytes = inject_section(cand.bytes, cfg.payloads[i], frac).bytes();
    }
  }
  cand.injected_bytes = cand.bytes.size() - sample.size();
  return cand;
}

EvalOutcome gamma_fitness(const RawExe& sample, const Genome& genes,
                          const Classifier& model, const GammaConfig& cfg) {
  const GammaCandidate cand = gamma_build(sample.bytes, genes, cfg);
  const double s = model.score(cand.bytes);
  return EvalOutcome{
      s + cfg.lambda * static_cast<double>(cand.injected_bytes), s,
      cand.injected_bytes};
}

AttackTrace run_gamma(const RawExe& sample, const Classifier& model,
                      const GammaConfig& gcfg, const GeneticConfig& cfg) {
  if (gcfg.payloads.empty()) {
    raise(Errc::no_payloads_found, "gamma attack needs harvested payloads");
  }
  Objective objective = [&](const Genome& g) {
    return gamma_fitness(sample, g, model, gcfg);
  };
  GeneticResult res =
      run_genetic(objective, static_cast<int>(gcfg.payloads.size()), cfg,
                  model.threshold());
  AttackTrace trace = std::move(res.trace);
  trace.initial_score = model.score(sample.bytes);
  trace.initial_detected = trace.initial_score >= model.threshold();
  trace.final_bytes = gamma_build(sample.bytes, res.best, gcfg).bytes;
  trace.succeeded = res.best_outcome.score < model.threshold();
  return trace;
}

void save_payloads(const std::filesystem::path& dir,
                   const std::vector<SectionPayload>& payloads) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "p%04zu.bin", i);
    write_file(dir / name, payloads[i].content);
    std::string section_name;
    for (auto c : payloads[i].source_name) {
      if (c == 0) break;
      section_name.push_back(static_cast<char>(c));
    }
    index.push_back({{"file", name},
                     {"source_sample", payloads[i].source_sample},
                     {"section_name", section_name},
                     {"length", payloads[i].content.size()}});
  }
  const std::string text = index.dump(2) + "\n";
  write_file(dir / "index.json", Bytes(text.begin(), text.end()));
}

std::vector<SectionPayload> load_payloads(const std::filesystem::path& dir) {
  const Bytes raw = read_file(dir / "index.json");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const std::exception& e) {
    raise(Errc::io_error, std::string("bad payload index: ") + e.what());
  }
  std::vector<SectionPayload> out;
  for (const auto& rec : index) {
    SectionPayload p;
    p.content = read_file(dir / rec.at("file").get<std::string>());
    p.source_sample = rec.value("source_sample", std::string());
    const auto name = rec.value("section_name", std::string());
    for (std::size_t i = 0; i < name.size() && i < 8; ++i) {
      p.source_name[i] = static_cast<std::uint8_t>(name[i]);
    }
    if (rec.contains("length") &&
        rec.at("length").get<std::size_t>() != p.content.size()) {
      raise(Errc::io_error, "payload length disagrees with its index record");
    }
    out.push_back(std::move(p));
  }
  if (out.empty()) raise(Errc::no_payloads_found, "payload index is empty");
  return out;
}

}  // namespace pevade
