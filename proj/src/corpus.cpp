#include "pevade/harness/corpus.hpp"

#include <json.hpp>
#include <random>

#include "pevade/error.hpp"
#include "pevade/pe/synth.hpp"

namespace pevade {

namespace {

Bytes profile_bytes(const ByteProfile& prof, std::size_t n,
                    std::mt19937_64& rng) {
  const double total = prof.zero + prof.printable + prof.high + prof.uniform;
  if (total <= 0) raise(Errc::inconsistent_spec, "byte profile has no mass");
  std::uniform_real_distribution<double> pick(0.0, total);
  std::uniform_int_distribution<int> printable(0x20, 0x7E);
  std::uniform_int_distribution<int> high(0x80, 0xFF);
  std::uniform_int_distribution<int> any(0x00, 0xFF);
  Bytes out(n);
  for (auto& b : out) {
    double r = pick(rng);
    if ((r -= prof.zero) < 0) {
      b = 0;
    } else if ((r -= prof.printable) < 0) {
      b = static_cast<std::uint8_t>(printable(rng));
    } else if ((r -= prof.high) < 0) {
      b = static_cast<std::uint8_t>(high(rng));
    } else {
      b = static_cast<std::uint8_t>(any(rng));
    }
  }
  return out;
}

}  // namespace

Bytes make_sample(const CorpusSpec& spec, Label label, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ByteProfile& prof =
      label == Label::benign ? spec.benign : spec.malicious;

  std::uniform_int_distribution<int> nsec(spec.min_sections, spec.max_sections);
  std::uniform_int_distribution<std::size_t> clen(spec.min_content,
                                                  spec.max_content);
  std::uniform_int_distribution<std::size_t> ovl(0, spec.max_overlay);

  pe::SynthSpec s;
  s.file_alignment = spec.file_alignment;
  s.section_alignment = spec.section_alignment;
  s.header_offset = spec.header_offset;
  s.extra_header_space = spec.extra_header_space;
  s.overlay_len = ovl(rng);
  s.seed = mix_seed(seed, 0xC0);  // drives the stub and overlay bytes
  const int n = nsec(rng);
  s.num_sections = static_cast<unsigned>(n);
  for (int i = 0; i < n; ++i) {
    pe::SectionSpec sec;
    sec.name = i == 0 ? ".text" : (i == 1 ? ".data" : ".rsrc");
    sec.content = profile_bytes(prof, clen(rng), rng);
    s.sections.push_back(std::move(sec));
  }
  return pe::synth_pe(s);
}

std::vector<DatasetEntry> make_corpus(const CorpusSpec& spec,
                                      std::uint64_t seed,
                                      const std::filesystem::path& out_dir) {
  if (spec.per_class < 1 || spec.min_sections < 1 ||
      spec.max_sections < spec.min_sections ||
      spec.max_content < spec.min_content || spec.min_content == 0) {
    raise(Errc::inconsistent_spec, "corpus description is contradictory");
  }
  std::filesystem::create_directories(out_dir / "benign");
  std::filesystem::create_directories(out_dir / "malicious");

  std::vector<DatasetEntry> entries;
  for (int cls = 0; cls < 2; ++cls) {
    const Label label = cls == 0 ? Label::benign : Label::malicious;
    for (int i = 0; i < spec.per_class; ++i) {
      const std::uint64_t sample_seed =
          mix_seed(seed, static_cast<std::uint64_t>(cls) << 32 |
                             static_cast<std::uint64_t>(i));
      const Bytes bytes = make_sample(spec, label, sample_seed);
      char name[32];
      std::snprintf(name, sizeof name, "%c%04d.exe", cls == 0 ? 'b' : 'm', i);
      const auto rel =
          std::filesystem::path(label_name(label)) / name;
      write_file(out_dir / rel, bytes);
      entries.push_back({rel, label});
    }
  }
  write_manifest(out_dir / "manifest.json", entries);
  return entries;
}

void write_manifest(const std::filesystem::path& manifest,
                    const std::vector<DatasetEntry>& entries) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries) {
    j.push_back({{"path", e.path.generic_string()},
                 {"label", label_name(e.label)}});
  }
  const std::string text = j.dump(2) + "\n";
  write_file(manifest, Bytes(text.begin(), text.end()));
}

std::vector<RawExe> load_dataset(const std::filesystem::path& manifest) {
  const Bytes raw = read_file(manifest);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("bad manifest: ") + e.what());
  }
  const auto base = manifest.parent_path();
  std::vector<RawExe> out;
  for (const auto& rec : j) {
    RawExe s;
    const auto rel = rec.at("path").get<std::string>();
    s.bytes = read_file(base / rel);
    if (s.bytes.empty()) raise(Errc::invalid_input, "empty sample " + rel);
    s.sample_id = rel;
    const auto label = rec.at("label").get<std::string>();
    if (label == "benign") {
      s.label = Label::benign;
    } else if (label == "malicious") {
      s.label = Label::malicious;
    } else {
      raise(Errc::config_error, "unknown label \"" + label + "\"");
    }
    out.push_back(std::move(s));
  }
  return out;
}

CorpusSpec parse_corpus_spec(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("corpus spec is not valid JSON: ") + e.what());
  }
  static const char* allowed[] = {
      "per_class",   "file_alignment", "section_alignment", "min_sections",
      "max_sections", "min_content",   "max_content",       "header_offset",
      "max_overlay", "extra_header_space", "profiles"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) { known = true; break; }
    }
    if (!known) {
      raise(Errc::config_error,
            "unknown key \"" + it.key() + "\" in corpus spec");
    }
  }
  CorpusSpec spec;
  auto profile = [](const nlohmann::json& pj, ByteProfile base) {
    for (auto it = pj.begin(); it != pj.end(); ++it) {
      if (it.key() == "zero") base.zero = it.value().get<double>();
      else if (it.key() == "printable") base.printable = it.value().get<double>();
      else if (it.key() == "high") base.high = it.value().get<double>();
      else if (it.key() == "uniform") base.uniform = it.value().get<double>();
      else raise(Errc::config_error, "unknown profile key \"" + it.key() + "\"");
    }
    return base;
  };
  try {
    spec.per_class = j.value("per_class", spec.per_class);
    spec.file_alignment = j.value("file_alignment", spec.file_alignment);
    spec.section_alignment = j.value("section_alignment", spec.section_alignment);
    spec.min_sections = j.value("min_sections", spec.min_sections);
    spec.max_sections = j.value("max_sections", spec.max_sections);
    spec.min_content = j.value("min_content", spec.min_content);
    spec.max_content = j.value("max_content", spec.max_content);
    spec.header_offset = j.value("header_offset", spec.header_offset);
    spec.max_overlay = j.value("max_overlay", spec.max_overlay);
    spec.extra_header_space =
        j.value("extra_header_space", spec.extra_header_space);
    if (j.contains("profiles")) {
      const auto& pj = j.at("profiles");
      for (auto it = pj.begin(); it != pj.end(); ++it) {
        if (it.key() == "benign") spec.benign = profile(it.value(), spec.benign);
        else if (it.key() == "malicious") spec.malicious = profile(it.value(), spec.malicious);
        else raise(Errc::config_error, "unknown profiles key \"" + it.key() + "\"");
      }
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("bad corpus spec value: ") + e.what());
  }
  return spec;
}

}  // namespace pevade
