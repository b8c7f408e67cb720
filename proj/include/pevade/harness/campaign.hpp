#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "pevade/attack/gamma.hpp"
#include "pevade/attack/genetic.hpp"
#include "pevade/attack/whitebox.hpp"
#include "pevade/model/byte_cnn.hpp"
#include "pevade/model/gbdt.hpp"

namespace pevade {

struct ModelRef {
  std::string type = "byte-cnn";     // "byte-cnn" | "gbdt"
  std::filesystem::path path;        // non-empty: load instead of training
  CnnHyperparams cnn;
  GbdtHyperparams gbdt;
  std::uint64_t seed = 0;
};

struct AttackSpec {
  std::string name;    // manipulation id, or gamma_padding / gamma_section
  std::string engine;  // whitebox | blackbox | gamma
  ManipSpec manip;
};

struct GammaParams {
  double lambda = 1e-5;
  std::filesystem::path payload_dir;
  bool binary_inclusion = false;
};

/// One JSON document drives a whole campaign; unknown keys are rejected so
/// typos in attack parameters cannot pass silently.
struct CampaignConfig {
  int version = 1;
  std::filesystem::path manifest;
  ModelRef model;
  std::vector<AttackSpec> attacks;
  std::vector<std::uint64_t> iteration_checkpoints{1, 25, 50};
  std::vector<std::uint64_t> query_checkpoints{10, 250, 500};
  double threshold = 0.5;
  WhiteboxConfig whitebox;
  GeneticConfig genetic;
  GammaParams gamma;
  std::uint64_t seed = 0;
  int jobs = 1;
};

CampaignConfig parse_campaign_config(const std::string& json_text,
                                     const std::filesystem::path& base_dir);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

struct SampleOutcome {
  std::string sample_id;
  bool applicable = true;
  std::string error;  // set when inapplicable
  AttackTrace trace;
};

struct AttackResult {
  AttackSpec spec;
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> detection_rates;  // fractions in [0,1], per checkpoint
  int n_applicable = 0;
  int n_inapplicable = 0;
  std::vector<SampleOutcome> outcomes;
};

struct CampaignResult {
  double baseline_detection_rate = 0.0;
  int n_malicious = 0;
  std::vector<AttackResult> attacks;
};

/// Runs every configured attack against every malicious sample, sampling each
/// trace at the configured effort checkpoints. Per-sample engine errors mark
/// the sample inapplicable for that attack (excluded from its denominator)
/// instead of aborting. Deterministic for fixed config and seeds, regardless
/// of the worker count.
CampaignResult run_campaign(const CampaignConfig& cfg);

/// Builds (or loads) the classifier a config names, with its threshold set.
std::unique_ptr<Classifier> resolve_model(const CampaignConfig& cfg,
                                          const std::vector<RawExe>& dataset,
                                          TrainReport* report = nullptr);

enum class ReportFormat { csv, json };

/// Table-2-shaped report: one row per (attack, checkpoint), stable ordering,
/// rates as percentages with one decimal. Re-emitting the same result yields
/// a byte-identical file.
void emit_report(const CampaignResult& result, ReportFormat format,
                 const std::filesystem::path& out);

void save_result(const CampaignResult& result,
                 const std::filesystem::path& path);
CampaignResult load_result(const std::filesystem::path& path);

}  // namespace pevade
