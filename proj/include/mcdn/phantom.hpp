#pragma once

#include "mcdn/image.hpp"

#include <cstdint>
#include <string>

namespace mcdn {

enum class EyeSide { Left, Right };
enum class AngleLabel : int { Open = 0, Closure = 1 };

std::string to_string(EyeSide side);
EyeSide eye_side_from_string(const std::string& s);

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Parameters of one synthetic anterior-segment ACA image (canonical, left-side
/// orientation: periphery on the left, eye midline at the right edge).
struct PhantomSpec {
  Index imageWidth = 400;
  Index imageHeight = 200;
  double corneaThickness = 20.0;
  double irisAngleDeg = 30.0;  // angle between cornea and iris at the ACA apex
  double lensVaultPx = 20.0;
  double irisBowPx = 0.0;      // posterior sag of the pupillary iris, 0 = flat
  double noiseSigma = 0.0;
  double closureThresholdDeg = 12.0;
  std::uint64_t rngSeed = 0;

  /// Throws ContractError naming the offending field.
  void validate() const;
  AngleLabel label() const { return irisAngleDeg < closureThresholdDeg ? AngleLabel::Closure : AngleLabel::Open; }

  friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

/// Rendered intensities of each structure on the [0,255] scale.
struct PhantomIntensities {
  static constexpr double background = 12.0;
  static constexpr double cornea = 210.0;
  static constexpr double iris = 170.0;
  static constexpr double lensCapsule = 150.0;
  static constexpr double lensInterior = 45.0;
};

/// Analytic curves behind a phantom. Image coordinates: x right, y down, pixel
/// centers at integer positions.
struct PhantomGeometry {
  double scale = 1.0;
  Point2 apex;                       // iris-cornea intersection (ACA)
  double corneaSlope = 0.0;          // tan of the cornea's ascent at the apex
  double junctionX = 0.0;            // straight cornea segment ends here
  double arcCenterX = 0.0, arcCenterY = 0.0, arcRadius = 0.0;
  double corneaTopY = 0.0;           // inner surface height at the midline
  double corneaThickness = 0.0;
  double irisSlope = 0.0;            // tan of the iris ascent (negative = descending)
  double irisStartU = 0.0;           // drawn iris band begins this far right of the apex
  double irisLengthU = 0.0;          // iris spans u in [0, irisLengthU]
  double irisBendU = 0.0;            // iris is straight for u < irisBendU
  double irisBow = 0.0;
  double irisThickness = 0.0;
  double lensApexY = 0.0, lensCenterX = 0.0, lensRadius = 0.0;
  double lensCapsuleThickness = 0.0;

  double cornea_inner_y(double x) const;
  /// Iris anterior surface; defined for every x (extended linearly left of the apex).
  double iris_surface_y(double x) const;
  /// Lens anterior surface, or NaN where the lens cap does not reach.
  double lens_surface_y(double x) const;
  bool iris_drawn_at(double x) const {
    const double u = x - apex.x;
    return u >= irisStartU && u <= irisLengthU;
  }
};

PhantomGeometry phantom_geometry(const PhantomSpec& spec);

struct PhantomSample {
  Image image;
  AngleLabel label = AngleLabel::Open;
  std::string subjectId;
  EyeSide eyeSide = EyeSide::Left;
  Point2 acaTruth;
  PhantomSpec spec;
};

/// Renders an anti-aliased phantom (4x4 supersampling), adds Box-Muller Gaussian
/// noise from a generator seeded with spec.rngSeed, rounds and clamps to [0,255].
PhantomSample generate_phantom(const PhantomSpec& spec);

/// Noise-free, unquantized rendering (intensities on [0,255]).
Eigen::MatrixXd render_phantom_clean(const PhantomSpec& spec, const PhantomGeometry& geometry);

/// Full two-angle scan: left ACA image as is, right ACA image mirrored into the
/// right half (as an instrument would record it).
Image compose_scan(const Image& left_aca, const Image& right_aca);

/// splitmix64 finalizer; the per-sample seed derivation of the dataset generator.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

}  // namespace mcdn
