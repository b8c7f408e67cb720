#pragma once

#include <filesystem>
#include <memory>

#include "pevade/model/byte_cnn.hpp"
#include "pevade/model/gbdt.hpp"

namespace pevade {

// Versioned binary container: 8-byte magic, u32 version, u32 model kind,
// f32 threshold, then kind-specific hyperparams and flat little-endian
// 32-bit float parameter arrays. Loaders reject magic/version mismatches.

void save_model(const std::filesystem::path& path, const ByteCnnModel& model,
                double threshold);
void save_model(const std::filesystem::path& path, const TreeModel& model,
                double threshold);

/// Dispatches on the stored kind; the result carries the stored threshold.
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path);

}  // namespace pevade
