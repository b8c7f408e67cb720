#include "pevade/attack/blackbox.hpp"

#include <cmath>

#include "pevade/error.hpp"

namespace pevade {

namespace {

Bytes decode_genes(const Genome& genes) {
  Bytes values(static_cast<std::size_t>(genes.size()));
  for (Eigen::Index i = 0; i < genes.size(); ++i) {
    values[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::lround(genes(i) * 255.0));
  }
  return values;
}

}  // namespace

AttackTrace run_blackbox_bytes(const RawExe& sample, const ManipSpec& manip,
                               const Classifier& model,
                               const GeneticConfig& cfg) {
  const Patchable patch = apply_manipulation(sample.bytes, manip);
  const std::size_t k = patch.editable_length();
  if (k == 0) {
    raise(Errc::no_editable_bytes,
          std::string(manip_name(manip.kind)) +
              " grants no editable bytes on this sample");
  }

  Objective objective = [&](const Genome& g) {
    const Bytes candidate = apply_bytes(patch, decode_genes(g));
    const double s = model.score(candidate);
    return EvalOutcome{s, s, 0};
  };

  GeneticResult res = run_genetic(objective, static_cast<int>(k), cfg,
                                  model.threshold());
  AttackTrace trace = std::move(res.trace);
  trace.initial_score = model.score(sample.bytes);
  trace.initial_detected = trace.initial_score >= model.threshold();
  trace.final_bytes = apply_bytes(patch, decode_genes(res.best));
  trace.succeeded = res.best_outcome.score < model.threshold();
  return trace;
}

}  // namespace pevade
