#pragma once

#include <Eigen/Dense>

#include "pevade/bytes.hpp"

namespace pevade {

// Static feature schema for the tree model: normalized whole-file byte
// histogram, per-section entropy over a fixed number of slots, then header
// scalars (num_sections, size_of_headers, file length, overlay length).
inline constexpr int kHistogramBins = 256;
inline constexpr int kSectionEntropySlots = 8;
inline constexpr int kHeaderScalars = 4;
inline constexpr int kFeatureDim =
    kHistogramBins + kSectionEntropySlots + kHeaderScalars;

/// Throws Error(invalid_input) when the buffer fails validate().
Eigen::VectorXd extract_features(const Bytes& bytes);

/// Shannon entropy of a byte range, in bits per byte (0 for empty input).
double byte_entropy(const Bytes& bytes, std::size_t begin, std::size_t end);

}  // namespace pevade
