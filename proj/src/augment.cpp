#include "mcdn/augment.hpp"

#include <algorithm>
#include <cmath>

namespace mcdn {

std::vector<ShiftOffset> AugmentConfig::default_offsets() {
  std::vector<ShiftOffset> out;
  for (int dy : {-8, 0, 8})
    for (int dx : {-8, 0, 8}) out.push_back({dx, dy});
  return out;
}

void AugmentConfig::validate() const {
  require(!intensityFactors.empty(), "AugmentConfig.intensityFactors must not be empty");
  for (double k : intensityFactors)
    require(std::isfinite(k) && k > 0.0, "AugmentConfig.intensityFactors must be positive");
  require(std::find(intensityFactors.begin(), intensityFactors.end(), 1.0) != intensityFactors.end(),
          "AugmentConfig.intensityFactors must contain 1.0");
  require(std::find(shiftOffsetsPx.begin(), shiftOffsetsPx.end(), ShiftOffset{}) != shiftOffsetsPx.end(),
          "AugmentConfig.shiftOffsetsPx must contain (0,0)");
}

std::vector<double> AugmentConfig::active_factors() const {
  return intensityEnabled ? intensityFactors : std::vector<double>{1.0};
}

std::vector<ShiftOffset> AugmentConfig::active_offsets() const {
  return shiftEnabled ? shiftOffsetsPx : std::vector<ShiftOffset>{ShiftOffset{}};
}

Image intensity_rescale(const Image& image, double k) {
  require(std::isfinite(k) && k > 0.0, "intensity_rescale: factor must be positive");
  Image out(image.rows(), image.cols());
  for (Index i = 0; i < image.size(); ++i) {
    const double v = std::floor(k * static_cast<double>(image.data()[i]) + 0.5);
    out.data()[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

std::vector<Image> shifted_patches(const Image& image, const AcaLocation& aca, const AugmentConfig& config, Index side) {
  std::vector<Image> out;
  out.reserve(config.shiftOffsetsPx.size());
  for (const auto& o : config.shiftOffsetsPx)
    out.push_back(crop_patch(image, Point2{aca.x + o.dx, aca.y + o.dy}, side));
  return out;
}

std::vector<AugmentedSample> expand_training_set(const std::vector<LabeledSample>& samples, const AugmentConfig& config) {
  config.validate();
  const auto factors = config.active_factors();
  const auto offsets = config.active_offsets();
  std::vector<AugmentedSample> out;
  out.reserve(samples.size() * factors.size() * offsets.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (double k : factors)
      for (const auto& o : offsets)
        out.push_back({i, k, o, samples[i].label, samples[i].subjectId, samples[i].split});
  return out;
}

MaterializedSample materialize(const AugmentedSample& entry, const std::vector<LabeledSample>& samples, Index patchSide) {
  require(entry.source < samples.size(), "materialize: source index out of range");
  const LabeledSample& s = samples[entry.source];
  MaterializedSample m;
  m.global = entry.intensity == 1.0 ? s.image : intensity_rescale(s.image, entry.intensity);
  m.patch = crop_patch(m.global, Point2{s.aca.x + entry.shift.dx, s.aca.y + entry.shift.dy}, patchSide);
  return m;
}

}  // namespace mcdn
