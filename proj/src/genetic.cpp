#include "pevade/attack/genetic.hpp"

#include <algorithm>
#include <random>

#include "pevade/error.hpp"

namespace pevade {

namespace {

struct Individual {
  Genome genes;
  EvalOutcome outcome;
};

}  // namespace

GeneticResult run_genetic(const Objective& objective, int genome_len,
                          const GeneticConfig& cfg,
                          std::optional<double> detect_threshold) {
  if (genome_len < 1) raise(Errc::config_error, "genome length must be >= 1");
  if (cfg.population_size < 1 || cfg.elitism_count < 1 ||
      cfg.elitism_count > cfg.population_size) {
    raise(Errc::config_error, "bad population/elitism configuration");
  }
  if (cfg.crossover_rate < 0 || cfg.crossover_rate > 1 ||
      cfg.mutation_rate < 0 || cfg.mutation_rate > 1) {
    raise(Errc::config_error, "operator rates must lie in [0,1]");
  }
  if (cfg.max_queries < static_cast<std::uint64_t>(cfg.population_size)) {
    raise(Errc::budget_too_small,
          "query budget cannot cover the initial population");
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, cfg.mutation_sigma);

  GeneticResult result;
  std::uint64_t evals = 0;
  bool have_best = false;

  auto evaluate = [&](Individual& ind) {
    ind.outcome = objective(ind.genes);
    ++evals;
    if (!have_best || ind.outcome.fitness < result.best_outcome.fitness) {
      have_best = true;
      result.best = ind.genes;
      result.best_outcome = ind.outcome;
    }
    const bool det =
        detect_threshold && result.best_outcome.score >= *detect_threshold;
    result.trace.steps.push_back({evals, result.best_outcome.score, det,
                                  result.best_outcome.injected_bytes});
  };

  std::vector<Individual> pop(static_cast<std::size_t>(cfg.population_size));
  for (auto& ind : pop) {
    ind.genes.resize(genome_len);
    for (int g = 0; g < genome_len; ++g) ind.genes(g) = uniform(rng);
    evaluate(ind);
  }

  auto by_fitness = [](const Individual& a, const Individual& b) {
    return a.outcome.fitness < b.outcome.fitness;
  };
  std::stable_sort(pop.begin(), pop.end(), by_fitness);

  auto tournament = [&]() -> const Individual& {
    std::uniform_int_distribution<int> pick(0, cfg.population_size - 1);
    int best = pick(rng);
    for (int i = 1; i < 3; ++i) {
      const int cand = pick(rng);
      if (pop[static_cast<std::size_t>(cand)].outcome.fitness <
          pop[static_cast<std::size_t>(best)].outcome.fitness) {
        best = cand;
      }
    }
    return pop[static_cast<std::size_t>(best)];
  };

  const int children_per_gen = cfg.population_size - cfg.elitism_count;
  while (evals + 1 <= cfg.max_queries && children_per_gen > 0) {
    std::vector<Individual> children;
    children.reserve(static_cast<std::size_t>(children_per_gen));
    for (int i = 0; i < children_per_gen; ++i) {
      const Individual& pa = tournament();
      const Individual& pb = tournament();
      Individual child;
      child.genes = pa.genes;
      if (uniform(rng) < cfg.crossover_rate) {
        for (int g = 0; g < genome_len; ++g) {
          if (uniform(rng) < 0.5) child.genes(g) = pb.genes(g);
        }
      }
      for (int g = 0; g < genome_len; ++g) {
        if (uniform(rng) < cfg.mutation_rate) {
          child.genes(g) = std::clamp(child.genes(g) + gauss(rng), 0.0, 1.0);
        }
      }
      children.push_back(std::move(child));
    }

    std::vector<Individual> next(pop.begin(),
                                 pop.begin() + cfg.elitism_count);
    bool exhausted = false;
    for (auto& child : children) {
      if (evals >= cfg.max_queries) {
        exhausted = true;
        break;
      }
      evaluate(child);
      next.push_back(std::move(child));
    }
    if (exhausted && next.size() <= static_cast<std::size_t>(cfg.elitism_count)) {
      break;
    }
    pop = std::move(next);
    std::stable_sort(pop.begin(), pop.end(), by_fitness);
    if (exhausted) break;
  }

  return result;
}

GeneticResult run_genetic(const std::function<double(const Genome&)>& objective,
                          int genome_len, const GeneticConfig& cfg) {
  Objective wrapped = [&objective](const Genome& g) {
    const double f = objective(g);
    return EvalOutcome{f, f, 0};
  };
  return run_genetic(wrapped, genome_len, cfg);
}

}  // namespace pevade
