#pragma once

#include "mcdn/phantom.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <vector>

namespace mcdn {

struct AcaLocation {
  double x = 0.0;
  double y = 0.0;
  EyeSide side = EyeSide::Left;
  double confidence = 0.0;

  Point2 point() const { return {x, y}; }
};

/// The five named anterior-segment measurements, in pixels unless noted.
struct ClinicalParams {
  static constexpr int kCount = 5;

  double anteriorChamberWidth = 0.0;
  double lensVault = 0.0;
  double chamberHeight = 0.0;
  double irisCurvature = 0.0;  // sagitta / chord, dimensionless
  double anteriorChamberArea = 0.0;

  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(kCount);
    v << anteriorChamberWidth, lensVault, chamberHeight, irisCurvature, anteriorChamberArea;
    return v;
  }
  static const char* name(int i);
};

class StructureNotFound : public std::runtime_error {
 public:
  StructureNotFound() : std::runtime_error("structure not found") {}
  explicit StructureNotFound(const std::string& detail) : std::runtime_error("structure not found: " + detail) {}
};

struct SplitScan {
  Image left;
  Image right;  // mirrored into left-side orientation
  AcaLocation leftAca;
  AcaLocation rightAca;
};

/// Bisects a two-angle scan at the midline and mirrors the right half. An ACA is
/// on the right iff x > W/2; ties go left.
SplitScan split_and_flip(const Image& scan, const AcaLocation& leftAca, const AcaLocation& rightAca);

/// Threshold t maximizing between-class variance; foreground is v > t.
int otsu_threshold(const Image& image);

/// Bright-ridge segmentation shared by ACA localization and clinical measurement.
struct RidgeSegmentation {
  int threshold = 0;
  Eigen::MatrixXi labels;          // 0 = dark, otherwise component id
  std::vector<Index> sizes;        // sizes[id]
  std::vector<int> order;          // component ids by decreasing size
  int cornea = 0;                  // largest component
  int iris = 0;                    // second largest
  double corneaLevel = 0.0;        // median interior intensity
  double irisLevel = 0.0;
  double darkLevel = 0.0;          // median of sub-threshold pixels

  bool bright(Index y, Index x) const { return labels(y, x) != 0; }
  Index third_size() const { return order.size() > 2 ? sizes[static_cast<std::size_t>(order[2])] : 0; }
};

RidgeSegmentation segment_ridges(const Image& image);

/// Apex of the dark wedge between cornea and iris. The nearest approach of the two
/// ridges gives a coarse estimate; the result is the intersection of lines fitted
/// to the sub-pixel ridge boundaries facing the wedge.
AcaLocation locate_aca(const Image& aca_image);

struct PatchWindow {
  Index x0 = 0;
  Index y0 = 0;
  Index side = 0;
};

/// Window [cx - side/2, cx + side/2) x [cy - side/2, cy + side/2) translated to lie
/// inside the image (clamped, never padded).
PatchWindow patch_window(Index width, Index height, Point2 center, Index side);

Image crop_patch(const Image& image, const AcaLocation& center, Index side = 120);
Image crop_patch(const Image& image, Point2 center, Index side = 120);

ClinicalParams extract_clinical_params(const Image& aca_image, const AcaLocation& aca);

}  // namespace mcdn
