#pragma once

#include "mcdn/anterior.hpp"
#include "mcdn/dataset.hpp"

#include <vector>

namespace mcdn {

struct ShiftOffset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const ShiftOffset&, const ShiftOffset&) = default;
};

struct AugmentConfig {
  std::vector<double> intensityFactors{0.5, 1.0, 1.5};
  std::vector<ShiftOffset> shiftOffsetsPx = default_offsets();
  bool intensityEnabled = true;
  bool shiftEnabled = true;

  /// {-8,0,8} x {-8,0,8}, dy-major.
  static std::vector<ShiftOffset> default_offsets();
  void validate() const;
  std::vector<double> active_factors() const;
  std::vector<ShiftOffset> active_offsets() const;
};

/// round-half-up(k * v) clamped to [0,255].
Image intensity_rescale(const Image& image, double k);

/// One crop per offset, in config order, centered at aca + offset.
std::vector<Image> shifted_patches(const Image& image, const AcaLocation& aca, const AugmentConfig& config,
                                   Index side = 120);

/// A canonical ACA image with its detected apex, as fed to training.
struct LabeledSample {
  Image image;
  AcaLocation aca;
  int label = 0;
  std::string subjectId;
  Split split = Split::Unassigned;
};

/// One entry of an expanded training set. Images are materialized on demand.
struct AugmentedSample {
  std::size_t source = 0;
  double intensity = 1.0;
  ShiftOffset shift;
  int label = 0;
  std::string subjectId;
  Split split = Split::Unassigned;
};

/// Cartesian expansion source x factor x offset (in that nesting order). With both
/// augmentations disabled each source appears once, unmodified.
std::vector<AugmentedSample> expand_training_set(const std::vector<LabeledSample>& samples, const AugmentConfig& config);

struct MaterializedSample {
  Image global;  // rescaled, never shifted
  Image patch;   // rescaled, cropped at the shifted apex
};

MaterializedSample materialize(const AugmentedSample& entry, const std::vector<LabeledSample>& samples,
                               Index patchSide = 120);

}  // namespace mcdn
