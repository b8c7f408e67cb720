#include "pevade/model/features.hpp"

#include <array>
#include <cmath>

#include "pevade/error.hpp"
#include "pevade/pe/pe.hpp"

namespace pevade {

double byte_entropy(const Bytes& bytes, std::size_t begin, std::size_t end) {
  end = std::min(end, bytes.size());
  if (begin >= end) return 0.0;
  std::array<std::size_t, 256> counts{};
  for (std::size_t i = begin; i < end; ++i) counts[bytes[i]]++;
  const double total = static_cast<double>(end - begin);
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

Eigen::VectorXd extract_features(const Bytes& bytes) {
  auto rep = pe::validate(bytes);
  if (!rep.ok) {
    raise(Errc::invalid_input,
          "feature extraction needs a valid file: " + rep.violations.front().rule);
  }
  const auto p = pe::parse(bytes);

  Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureDim);
  std::array<std::size_t, 256> counts{};
  for (auto b : bytes) counts[b]++;
  for (int i = 0; i < kHistogramBins; ++i) {
    f(i) = static_cast<double>(counts[static_cast<std::size_t>(i)]) /
           static_cast<double>(bytes.size());
  }
  for (int slot = 0; slot < kSectionEntropySlots; ++slot) {
    if (static_cast<std::size_t>(slot) < p.sections.size()) {
      const auto& s = p.sections[static_cast<std::size_t>(slot)];
      f(kHistogramBins + slot) =
          byte_entropy(bytes, s.raw_pointer, s.raw_end());
    }
  }
  const int base = kHistogramBins + kSectionEntropySlots;
  f(base + 0) = static_cast<double>(p.num_sections);
  f(base + 1) = static_cast<double>(p.size_of_headers);
  f(base + 2) = static_cast<double>(bytes.size());
  f(base + 3) = static_cast<double>(p.overlay.size());
  return f;
}

}  // namespace pevade
