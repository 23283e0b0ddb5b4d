#include "mcdn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace mcdn {

std::string to_string(EyeSide side) { return side == EyeSide::Left ? "left" : "right"; }

EyeSide eye_side_from_string(const std::string& s) {
  if (s == "left") return EyeSide::Left;
  if (s == "right") return EyeSide::Right;
  throw ContractError("eye side must be 'left' or 'right', got '" + s + "'");
}

void PhantomSpec::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ContractError("PhantomSpec." + field + " " + why);
  };
  if (imageWidth < 160) fail("imageWidth", "must be at least 160");
  if (imageHeight < 160) fail("imageHeight", "must be at least 160");
  if (!(irisAngleDeg > 0.0 && irisAngleDeg < 90.0)) fail("irisAngleDeg", "must lie in (0, 90)");
  if (!(noiseSigma >= 0.0) || !std::isfinite(noiseSigma)) fail("noiseSigma", "must be non-negative");
  if (!(corneaThickness > 0.0 && corneaThickness <= 40.0)) fail("corneaThickness", "must lie in (0, 40]");
  if (!(lensVaultPx >= 0.0 && lensVaultPx <= 60.0)) fail("lensVaultPx", "must lie in [0, 60]");
  if (!(irisBowPx >= 0.0 && irisBowPx <= 20.0)) fail("irisBowPx", "must lie in [0, 20]");
  if (!(closureThresholdDeg > 0.0 && closureThresholdDeg < 90.0)) fail("closureThresholdDeg", "must lie in (0, 90)");
}

namespace {

constexpr double kCorneaAscentDeg = 22.0;
constexpr double kMinRidgeGapPx = 2.5;  // iris band starts where it clears the cornea by this much

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

PhantomGeometry phantom_geometry(const PhantomSpec& spec) {
  spec.validate();
  PhantomGeometry g;
  const double s = std::min(static_cast<double>(spec.imageWidth) / 400.0, static_cast<double>(spec.imageHeight) / 200.0);
  g.scale = s;
  const double alpha = deg2rad(kCorneaAscentDeg);
  g.corneaSlope = std::tan(alpha);
  g.corneaThickness = spec.corneaThickness;

  g.apex.x = 68.0 * s;
  g.irisLengthU = 108.0 * s;
  g.junctionX = g.apex.x + g.irisLengthU + 12.0 * s;
  g.arcCenterX = 400.0 * s;
  g.arcRadius = (g.arcCenterX - g.junctionX) / std::sin(alpha);
  g.corneaTopY = spec.corneaThickness + 18.0 * s;
  g.arcCenterY = g.corneaTopY + g.arcRadius;
  const double junction_y = g.arcCenterY - g.arcRadius * std::cos(alpha);
  g.apex.y = junction_y + (g.junctionX - g.apex.x) * g.corneaSlope;

  g.irisSlope = std::tan(alpha - deg2rad(spec.irisAngleDeg));
  g.irisBendU = 0.8 * g.irisLengthU;
  g.irisBow = spec.irisBowPx;
  g.irisThickness = 12.0 * s;
  g.irisStartU = std::max(kMinRidgeGapPx / (g.corneaSlope - g.irisSlope), 1.0);

  g.lensCenterX = g.arcCenterX;
  g.lensApexY = g.apex.y - spec.lensVaultPx;
  g.lensCapsuleThickness = 2.0;
  // Cap passes just below the image bottom, 20 px past the iris tip.
  const double dx = g.lensCenterX - (g.apex.x + g.irisLengthU + 20.0 * s);
  const double dy = 198.0 * s - g.lensApexY;
  g.lensRadius = (dx * dx + dy * dy) / (2.0 * dy);
  return g;
}

double PhantomGeometry::cornea_inner_y(double x) const {
  if (x <= junctionX) return apex.y - (x - apex.x) * corneaSlope;
  if (x >= arcCenterX) return corneaTopY;
  const double d = arcCenterX - x;
  return arcCenterY - std::sqrt(arcRadius * arcRadius - d * d);
}

double PhantomGeometry::iris_surface_y(double x) const {
  const double u = x - apex.x;
  double y = apex.y - u * irisSlope;
  if (u > irisBendU) {
    const double t = (u - irisBendU) / (irisLengthU - irisBendU);
    y += irisBow * t * t;
  }
  return y;
}

double PhantomGeometry::lens_surface_y(double x) const {
  const double d = std::abs(std::min(x, lensCenterX) - lensCenterX);
  if (d >= lensRadius) return std::numeric_limits<double>::quiet_NaN();
  return lensApexY + lensRadius - std::sqrt(lensRadius * lensRadius - d * d);
}

Eigen::MatrixXd render_phantom_clean(const PhantomSpec& spec, const PhantomGeometry& g) {
  constexpr int kSub = 4;
  const Index w = spec.imageWidth;
  const Index h = spec.imageHeight;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h, w);

  // Per sub-column curve heights.
  const Index sub_w = w * kSub;
  std::vector<double> cornea(sub_w), iris(sub_w), lens(sub_w);
  std::vector<char> iris_on(sub_w);
  for (Index i = 0; i < sub_w; ++i) {
    const double x = static_cast<double>(i) / kSub + 0.5 / kSub - 0.5;
    cornea[i] = g.cornea_inner_y(x);
    iris[i] = g.iris_surface_y(x);
    iris_on[i] = g.iris_drawn_at(x) ? 1 : 0;
    lens[i] = g.lens_surface_y(x);
  }

  using I = PhantomIntensities;
  for (Index py = 0; py < h; ++py)
    for (Index px = 0; px < w; ++px) {
      double acc = 0.0;
      for (int sy = 0; sy < kSub; ++sy) {
        const double y = static_cast<double>(py) + (sy + 0.5) / kSub - 0.5;
        for (int sx = 0; sx < kSub; ++sx) {
          const Index i = px * kSub + sx;
          double v = I::background;
          if (y <= cornea[i] && y >= cornea[i] - g.corneaThickness) {
            v = I::cornea;
          } else if (iris_on[i] && y >= iris[i] && y <= iris[i] + g.irisThickness) {
            v = I::iris;
          } else if (!std::isnan(lens[i]) && y >= lens[i]) {
            v = y <= lens[i] + g.lensCapsuleThickness ? I::lensCapsule : I::lensInterior;
          }
          acc += v;
        }
      }
      out(py, px) = acc / (kSub * kSub);
    }
  return out;
}

PhantomSample generate_phantom(const PhantomSpec& spec) {
  const PhantomGeometry g = phantom_geometry(spec);
  const Eigen::MatrixXd clean = render_phantom_clean(spec, g);

  PhantomSample sample;
  sample.spec = spec;
  sample.label = spec.label();
  sample.acaTruth = g.apex;
  sample.image.resize(spec.imageHeight, spec.imageWidth);

  std::mt19937_64 rng(spec.rngSeed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool have_spare = false;
  double spare = 0.0;
  auto gaussian = [&]() {
    // Box-Muller, both outputs used.
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    double u1 = unit(rng);
    while (u1 <= 0.0) u1 = unit(rng);
    const double u2 = unit(rng);
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  };

  for (Index y = 0; y < spec.imageHeight; ++y)
    for (Index x = 0; x < spec.imageWidth; ++x) {
      double v = clean(y, x);
      if (spec.noiseSigma > 0.0) v += spec.noiseSigma * gaussian();
      sample.image(y, x) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  return sample;
}

Image compose_scan(const Image& left_aca, const Image& right_aca) {
  require(left_aca.rows() == right_aca.rows() && left_aca.cols() == right_aca.cols(),
          "compose_scan: ACA images must have equal dims");
  Image scan(left_aca.rows(), left_aca.cols() * 2);
  scan.leftCols(left_aca.cols()) = left_aca;
  scan.rightCols(right_aca.cols()) = flip_horizontal(right_aca);
  return scan;
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mcdn
