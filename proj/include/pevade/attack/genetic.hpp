#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>

#include "pevade/attack/trace.hpp"

namespace pevade {

/// Candidate solution: genes in [0,1]^k. Byte-region attacks decode genes to
/// byte values; the benign-injection attack reads them as per-payload
/// inclusion fractions.
using Genome = Eigen::VectorXd;

struct GeneticConfig {
  int population_size = 10;
  std::uint64_t max_queries = 500;
  double crossover_rate = 0.7;
  double mutation_rate = 0.3;
  double mutation_sigma = 0.15;
  int elitism_count = 1;
  std::uint64_t seed = 0;
};

/// What one objective evaluation produced. `fitness` drives the search
/// (lower is better); `score` and `injected_bytes` are bookkeeping carried
/// into the trace so detection can be judged on the raw classifier output
/// even when the fitness includes a size penalty.
struct EvalOutcome {
  double fitness = 0.0;
  double score = 0.0;
  std::uint64_t injected_bytes = 0;
};

using Objective = std::function<EvalOutcome(const Genome&)>;

struct GeneticResult {
  Genome best;
  EvalOutcome best_outcome;
  AttackTrace trace;  // one step per evaluation; score/detected track the
                      // best-so-far candidate
};

/// Generational loop: seeded uniform init, tournament selection of size 3,
/// uniform crossover, per-gene Gaussian mutation clamped to [0,1], elitism.
/// Stops before any evaluation that would exceed max_queries. Deterministic
/// for a fixed (objective, k, config).
GeneticResult run_genetic(const Objective& objective, int genome_len,
                          const GeneticConfig& cfg,
                          std::optional<double> detect_threshold = {});

/// Plain scalar-objective convenience wrapper.
GeneticResult run_genetic(const std::function<double(const Genome&)>& objective,
                          int genome_len, const GeneticConfig& cfg);

}  // namespace pevade
