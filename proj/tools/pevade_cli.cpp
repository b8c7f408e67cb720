// pevade: generate functionality-preserving adversarial rewrites of PE files
// and measure how detection degrades with attack effort.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "pevade/attack/blackbox.hpp"
#include "pevade/error.hpp"
#include "pevade/harness/campaign.hpp"
#include "pevade/harness/corpus.hpp"
#include "pevade/model/model_io.hpp"
#include "pevade/pe/pe.hpp"
#include "pevade/pe/synth.hpp"

namespace {

using namespace pevade;

std::string slurp(const std::filesystem::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

int cmd_synth(const std::filesystem::path& config,
              const std::filesystem::path& out, std::uint64_t seed,
              bool seed_set) {
  const std::string text = slurp(config);
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) raise(Errc::config_error, "config is not valid JSON");
  if (j.contains("num_sections") || j.contains("sections")) {
    // Single-file builder spec.
    pe::SynthSpec spec = pe::parse_synth_spec(text);
    if (seed_set) spec.seed = seed;
    write_file(out, pe::synth_pe(spec));
    std::cout << "wrote " << out.string() << "\n";
    return 0;
  }
  CorpusSpec spec = parse_corpus_spec(text);
  const auto entries = make_corpus(spec, seed, out);
  std::cout << "wrote " << entries.size() << " samples under " << out.string()
            << " (manifest.json included)\n";
  return 0;
}

int cmd_train(const std::filesystem::path& config,
              const std::filesystem::path& out, std::uint64_t seed,
              bool seed_set) {
  CampaignConfig cfg = load_campaign_config(config);
  if (seed_set) cfg.model.seed = seed;
  const auto dataset = load_dataset(cfg.manifest);
  TrainReport report;
  cfg.model.path.clear();  // always train here
  if (cfg.model.type == "byte-cnn") {
    const auto model = train_cnn(dataset, cfg.model.cnn, cfg.model.seed, &report);
    save_model(out, model, cfg.threshold);
  } else {
    const auto model = train_trees(dataset, cfg.model.gbdt, cfg.model.seed, &report);
    save_model(out, model, cfg.threshold);
  }
  std::printf("trained %s on %zu samples: accuracy %.4f, loss %.4f (%d epochs)\n",
              cfg.model.type.c_str(), dataset.size(), report.final_accuracy,
              report.final_loss, report.epochs_run);
  std::cout << "model saved to " << out.string() << "\n";
  return 0;
}

int cmd_attack(const std::filesystem::path& config,
               const std::filesystem::path& sample_path, std::uint64_t seed,
               bool seed_set) {
  CampaignConfig cfg = load_campaign_config(config);
  if (seed_set) cfg.seed = seed;
  if (cfg.attacks.size() != 1) {
    raise(Errc::config_error, "attack verb expects exactly one attack entry");
  }
  const auto dataset = load_dataset(cfg.manifest);
  const auto model = resolve_model(cfg, dataset);

  RawExe sample;
  sample.bytes = read_file(sample_path);
  sample.sample_id = sample_path.filename().string();
  sample.label = Label::malicious;

  const AttackSpec& spec = cfg.attacks.front();
  AttackTrace trace;
  if (spec.engine == "whitebox") {
    WhiteboxConfig w = cfg.whitebox;
    w.max_iterations = static_cast<unsigned>(cfg.iteration_checkpoints.back());
    w.seed = cfg.seed;
    trace = run_whitebox(sample, spec.manip, *model, w);
  } else if (spec.engine == "blackbox") {
    GeneticConfig g = cfg.genetic;
    g.max_queries = cfg.query_checkpoints.back();
    g.seed = cfg.seed;
    trace = run_blackbox_bytes(sample, spec.manip, *model, g);
  } else {
    GeneticConfig g = cfg.genetic;
    g.max_queries = cfg.query_checkpoints.back();
    g.seed = cfg.seed;
    GammaConfig gamma;
    gamma.lambda = cfg.gamma.lambda;
    gamma.binary_inclusion = cfg.gamma.binary_inclusion;
    gamma.mode = spec.name == "gamma_section" ? GammaMode::section_injection
                                              : GammaMode::padding;
    gamma.payloads = load_payloads(cfg.gamma.payload_dir);
    trace = run_gamma(sample, *model, gamma, g);
  }

  std::printf("# %s via %s on %s\n", spec.name.c_str(), spec.engine.c_str(),
              sample.sample_id.c_str());
  std::printf("effort 0: score %.6f detected %d\n", trace.initial_score,
              trace.initial_detected ? 1 : 0);
  for (const auto& st : trace.steps) {
    std::printf("effort %llu: score %.6f detected %d",
                static_cast<unsigned long long>(st.effort), st.score,
                st.detected ? 1 : 0);
    if (st.injected_bytes > 0) {
      std::printf(" injected %llu",
                  static_cast<unsigned long long>(st.injected_bytes));
    }
    std::printf("\n");
  }
  std::printf("evasion %s\n", trace.succeeded ? "succeeded" : "failed");
  return 0;
}

int cmd_campaign(const std::filesystem::path& config,
                 const std::filesystem::path& out_dir, std::uint64_t seed,
                 bool seed_set, int jobs, const std::string& format) {
  CampaignConfig cfg = load_campaign_config(config);
  if (seed_set) cfg.seed = seed;
  if (jobs > 0) cfg.jobs = jobs;
  const CampaignResult result = run_campaign(cfg);
  std::filesystem::create_directories(out_dir);
  save_result(result, out_dir / "result.json");
  const bool csv = format != "json";
  emit_report(result, csv ? ReportFormat::csv : ReportFormat::json,
              out_dir / (csv ? "report.csv" : "report.json"));
  std::printf("baseline detection rate: %.1f%% over %d malicious samples\n",
              result.baseline_detection_rate * 100.0, result.n_malicious);
  for (const auto& ar : result.attacks) {
    std::printf("%s (%s):", ar.spec.name.c_str(), ar.spec.engine.c_str());
    for (std::size_t i = 0; i < ar.checkpoints.size(); ++i) {
      std::printf(" %llu->%.1f%%",
                  static_cast<unsigned long long>(ar.checkpoints[i]),
                  ar.detection_rates[i] * 100.0);
    }
    if (ar.n_inapplicable > 0) {
      std::printf(" (%d inapplicable)", ar.n_inapplicable);
    }
    std::printf("\n");
  }
  std::cout << "results under " << out_dir.string() << "\n";
  return 0;
}

int cmd_report(const std::filesystem::path& result_path,
               const std::filesystem::path& out, const std::string& format) {
  const CampaignResult result = load_result(result_path);
  emit_report(result,
              format == "json" ? ReportFormat::json : ReportFormat::csv, out);
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

int cmd_harvest(const std::filesystem::path& goodware_dir,
                const std::string& section, std::size_t max_count,
                const std::filesystem::path& out) {
  const auto payloads = harvest_sections(goodware_dir, section, max_count);
  save_payloads(out, payloads);
  std::cout << "harvested " << payloads.size() << " \"" << section
            << "\" payloads into " << out.string() << "\n";
  return 0;
}

int cmd_validate(const std::filesystem::path& file) {
  const Bytes bytes = read_file(file);
  const auto rep = pe::validate(bytes);
  if (rep.ok) {
    std::cout << file.string() << ": ok\n";
    return 0;
  }
  for (const auto& v : rep.violations) {
    std::printf("%s: %s at offset 0x%zx: %s\n", file.string().c_str(),
                v.rule.c_str(), v.offset, v.message.c_str());
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial rewriting of PE files against malware classifiers"};
  app.require_subcommand(1);

  std::filesystem::path config, out, input;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  std::string format = "csv";
  std::string section = ".data";
  std::size_t max_count = 100;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_set = true; });
  };

  auto* synth = app.add_subcommand("synth", "build a synthetic corpus or file");
  synth->add_option("--config", config, "corpus or builder spec (JSON)")
      ->required();
  synth->add_option("--out", out, "output directory (corpus) or file")
      ->required();
  add_seed(synth);

  auto* train = app.add_subcommand("train", "train a model per the config");
  train->add_option("--config", config)->required();
  train->add_option("--out", out, "model container path")->required();
  add_seed(train);

  auto* attack = app.add_subcommand("attack", "attack one sample, print trace");
  attack->add_option("sample", input, "PE file to attack")->required();
  attack->add_option("--config", config)->required();
  add_seed(attack);

  auto* campaign = app.add_subcommand("campaign", "run the full attack matrix");
  campaign->add_option("--config", config)->required();
  campaign->add_option("--out", out, "output directory")->required();
  campaign->add_option("--jobs", jobs, "worker threads (default from config)");
  campaign->add_option("--format", format, "report format: csv|json")
      ->check(CLI::IsMember({"csv", "json"}));
  add_seed(campaign);

  auto* report = app.add_subcommand("report", "re-emit a saved campaign result");
  report->add_option("result", input, "result.json from a campaign")->required();
  report->add_option("--out", out)->required();
  report->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  auto* harvest = app.add_subcommand("harvest", "extract benign section payloads");
  harvest->add_option("goodware", input, "directory of benign PE files")
      ->required();
  harvest->add_option("--section", section, "section name filter");
  harvest->add_option("--max", max_count, "payload cap");
  harvest->add_option("--out", out, "payload store directory")->required();

  auto* validate = app.add_subcommand("validate", "check one PE file");
  validate->add_option("file", input)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(config, out, seed, seed_set);
    if (train->parsed()) return cmd_train(config, out, seed, seed_set);
    if (attack->parsed()) return cmd_attack(config, input, seed, seed_set);
    if (campaign->parsed())
      return cmd_campaign(config, out, seed, seed_set, jobs, format);
    if (report->parsed()) return cmd_report(input, out, format);
    if (harvest->parsed()) return cmd_harvest(input, section, max_count, out);
    if (validate->parsed()) return cmd_validate(input);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::config_error ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
