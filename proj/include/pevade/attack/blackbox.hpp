#pragma once

#include "pevade/attack/genetic.hpp"
#include "pevade/manip/manipulations.hpp"
#include "pevade/model/classifier.hpp"
#include "pevade/sample.hpp"

namespace pevade {

/// Query-only attack over the editable bytes of a manipulation: genome length
/// equals the editable byte count, genes decode as round(gene * 255), and the
/// objective is the classifier score of the patched candidate. The trace
/// holds exactly one step per classifier query.
AttackTrace run_blackbox_bytes(const RawExe& sample, const ManipSpec& manip,
                               const Classifier& model,
                               const GeneticConfig& cfg);

}  // namespace pevade
