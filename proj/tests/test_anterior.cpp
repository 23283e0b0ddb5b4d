#include <doctest.h>

#include "mcdn/anterior.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace mcdn;

namespace {

PhantomSpec random_spec(oracle::Gen& gen, double sigma) {
  PhantomSpec s;
  s.irisAngleDeg = gen.coin() ? gen.uniform(15.0, 45.0) : gen.uniform(3.0, 11.0);
  s.lensVaultPx = gen.uniform(10.0, 35.0);
  s.irisBowPx = gen.uniform(0.0, 5.0);
  s.corneaThickness = gen.uniform(16.0, 22.0);
  s.noiseSigma = sigma;
  s.rngSeed = static_cast<std::uint64_t>(gen.integer(0, 1 << 30));
  return s;
}

Image random_image(Index h, Index w, oracle::Gen& gen) {
  Image img(h, w);
  for (Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(gen.integer(0, 255));
  return img;
}

AcaLocation at(double x, double y) {
  AcaLocation a;
  a.x = x;
  a.y = y;
  return a;
}

}  // namespace

TEST_SUITE("split_and_flip") {
  TEST_CASE("left half unchanged, right half mirrored, flipping twice restores it") {
    oracle::Gen gen(301);
    const Image scan = random_image(6, 10, gen);
    const auto s = split_and_flip(scan, at(2, 1), at(8, 3));
    CHECK(s.left == Image(scan.leftCols(5)));
    CHECK(flip_horizontal(s.right) == Image(scan.rightCols(5)));
    CHECK(flip_horizontal(flip_horizontal(s.right)) == s.right);
    CHECK(s.leftAca.side == EyeSide::Left);
    CHECK(s.rightAca.side == EyeSide::Right);
  }

  TEST_CASE("right ACA at x = W-10 maps to W/2 - 1 - (x - W/2)") {
    oracle::Gen gen(302);
    const Index w = 800;
    const Image scan = random_image(200, w, gen);
    const double x = static_cast<double>(w - 10);
    const auto s = split_and_flip(scan, at(100, 50), at(x, 77));
    CHECK(s.rightAca.x == static_cast<double>(w / 2) - 1.0 - (x - static_cast<double>(w / 2)));
    CHECK(s.rightAca.y == 77.0);
    // Pixel under the remapped apex is the pixel under the original apex.
    CHECK(s.right(77, static_cast<Index>(s.rightAca.x)) == scan(77, w - 10));
  }

  TEST_CASE("remapped coordinates always address the same pixel") {
    oracle::Gen gen(303);
    for (int trial = 0; trial < 100; ++trial) {
      const Index w = 2 * gen.integer(2, 40), h = gen.integer(1, 20);
      const Image scan = random_image(h, w, gen);
      const Index rx = gen.integer(w / 2 + 1, w - 1), ry = gen.integer(0, h - 1);
      const Index lx = gen.integer(0, w / 2 - 1), ly = gen.integer(0, h - 1);
      const auto s = split_and_flip(scan, at(lx, ly), at(rx, ry));
      CHECK(s.right(ry, static_cast<Index>(s.rightAca.x)) == scan(ry, rx));
      CHECK(s.left(ly, static_cast<Index>(s.leftAca.x)) == scan(ly, lx));
    }
  }

  TEST_CASE("an ACA on the midline belongs to the left side") {
    const Image scan = Image::Zero(4, 10);
    const auto s = split_and_flip(scan, at(5, 1), at(6, 1));
    CHECK(s.leftAca.x == 4.0);  // clamped into the half frame
    CHECK_THROWS_AS(split_and_flip(scan, at(2, 1), at(5, 1)), ContractError);
    CHECK_THROWS_AS(split_and_flip(scan, at(5.5, 1), at(7, 1)), ContractError);
  }

  TEST_CASE("odd widths and out-of-scan ACAs are rejected") {
    CHECK_THROWS_AS(split_and_flip(Image::Zero(4, 9), at(1, 1), at(7, 1)), ContractError);
    CHECK_THROWS_AS(split_and_flip(Image::Zero(4, 10), at(1, 4), at(7, 1)), ContractError);
    CHECK_THROWS_AS(split_and_flip(Image::Zero(4, 10), at(1, 1), at(10, 1)), ContractError);
  }

  TEST_CASE("splitting a composed scan recovers both canonical images") {
    PhantomSpec a, b;
    b.irisAngleDeg = 7.0;
    b.rngSeed = 3;
    const auto la = generate_phantom(a), rb = generate_phantom(b);
    const Image scan = compose_scan(la.image, rb.image);
    const double w = 800.0;
    const auto s = split_and_flip(scan, at(la.acaTruth.x, la.acaTruth.y), at(w - 1.0 - rb.acaTruth.x, rb.acaTruth.y));
    CHECK(s.left == la.image);
    CHECK(s.right == rb.image);
    CHECK(s.rightAca.x == doctest::Approx(rb.acaTruth.x).epsilon(1e-12));
  }
}

TEST_SUITE("locate_aca") {
  TEST_CASE("noise-free phantoms localize within 3 px over 50 seeds") {
    oracle::Gen gen(311);
    for (int trial = 0; trial < 50; ++trial) {
      const auto spec = random_spec(gen, 0.0);
      const auto sample = generate_phantom(spec);
      const auto aca = locate_aca(sample.image);
      INFO("angle " << spec.irisAngleDeg << " seed " << spec.rngSeed);
      CHECK(distance(aca.point(), sample.acaTruth) <= 3.0);
      CHECK(aca.confidence >= 0.0);
      CHECK(aca.confidence <= 1.0);
      CHECK(aca.x >= 0.0);
      CHECK(aca.x < 400.0);
      CHECK(aca.y >= 0.0);
      CHECK(aca.y < 200.0);
    }
  }

  TEST_CASE("sigma 10 phantoms localize within 6 px in at least 95 of 100") {
    oracle::Gen gen(312);
    int hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const auto sample = generate_phantom(random_spec(gen, 10.0));
      try {
        hits += distance(locate_aca(sample.image).point(), sample.acaTruth) <= 6.0;
      } catch (const StructureNotFound&) {
      }
    }
    CHECK(hits >= 95);
  }

  TEST_CASE("a blank image has no structure") {
    try {
      (void)locate_aca(Image::Constant(200, 400, 90));
      FAIL("expected StructureNotFound");
    } catch (const StructureNotFound& e) {
      CHECK(std::string(e.what()).rfind("structure not found", 0) == 0);
    }
    CHECK_THROWS_AS(locate_aca(Image::Zero(200, 400)), StructureNotFound);
  }

  TEST_CASE("a single bright block is not enough") {
    Image img = Image::Constant(200, 400, 10);
    img.block(20, 20, 30, 300).setConstant(200);
    CHECK_THROWS_AS(locate_aca(img), StructureNotFound);
  }

  TEST_CASE("clean phantoms are confident") {
    CHECK(locate_aca(generate_phantom(PhantomSpec{}).image).confidence > 0.5);
  }

  TEST_CASE("Otsu splits a two-level image between the levels") {
    Image img = Image::Constant(10, 10, 20);
    img.topRows(4).setConstant(200);
    const int t = otsu_threshold(img);
    CHECK(t >= 20);
    CHECK(t < 200);
  }
}

TEST_SUITE("crop_patch") {
  TEST_CASE("center (200,100) in 400x200 gives [140,260) x [40,160)") {
    const auto win = patch_window(400, 200, {200, 100}, 120);
    CHECK(win.x0 == 140);
    CHECK(win.y0 == 40);
    oracle::Gen gen(321);
    const Image img = random_image(200, 400, gen);
    CHECK(crop_patch(img, Point2{200, 100}) == Image(img.block(40, 140, 120, 120)));
  }

  TEST_CASE("center (10,10) clamps to [0,120) x [0,120)") {
    const auto win = patch_window(400, 200, {10, 10}, 120);
    CHECK(win.x0 == 0);
    CHECK(win.y0 == 0);
    const auto far = patch_window(400, 200, {399, 199}, 120);
    CHECK(far.x0 == 280);
    CHECK(far.y0 == 80);
  }

  TEST_CASE("output is always 120x120 and lies inside the image") {
    oracle::Gen gen(322);
    const Image img = random_image(200, 400, gen);
    for (int trial = 0; trial < 500; ++trial) {
      const Point2 c{gen.uniform(0.0, 399.999), gen.uniform(0.0, 199.999)};
      const auto win = patch_window(400, 200, c, 120);
      CHECK(win.x0 >= 0);
      CHECK(win.y0 >= 0);
      CHECK(win.x0 + 120 <= 400);
      CHECK(win.y0 + 120 <= 200);
      const Image p = crop_patch(img, c);
      CHECK(p.rows() == 120);
      CHECK(p.cols() == 120);
    }
  }

  TEST_CASE("an image smaller than the patch is rejected") {
    CHECK_THROWS_AS(crop_patch(Image::Zero(100, 400), Point2{50, 50}), ContractError);
    CHECK_THROWS_AS(crop_patch(Image::Zero(200, 119), Point2{50, 50}), ContractError);
    CHECK(crop_patch(Image::Zero(120, 120), Point2{50, 50}).size() == 120 * 120);
  }
}

TEST_SUITE("clinical parameters") {
  ClinicalParams measure(const PhantomSpec& spec) {
    const auto s = generate_phantom(spec);
    return extract_clinical_params(s.image, locate_aca(s.image));
  }

  TEST_CASE("a flat iris has near-zero curvature") {
    PhantomSpec s;
    s.irisBowPx = 0.0;
    for (double angle : {8.0, 20.0, 35.0}) {
      s.irisAngleDeg = angle;
      CHECK(measure(s).irisCurvature < 0.02);
    }
  }

  TEST_CASE("a bowed iris curves more than a flat one") {
    PhantomSpec s;
    const double flat = measure(s).irisCurvature;
    s.irisBowPx = 10.0;
    CHECK(measure(s).irisCurvature > flat);
  }

  TEST_CASE("lens vault ordering follows the configuration") {
    PhantomSpec s;
    s.lensVaultPx = 20.0;
    const double lo = measure(s).lensVault;
    s.lensVaultPx = 40.0;
    const double hi = measure(s).lensVault;
    CHECK(hi > lo);
    CHECK(hi - lo == doctest::Approx(20.0).epsilon(0.1));
  }

  TEST_CASE("chamber area strictly decreases as the angle narrows") {
    double previous = INFINITY;
    for (double angle : {40.0, 31.25, 22.5, 13.75, 5.0}) {
      PhantomSpec s;
      s.irisAngleDeg = angle;
      const double area = measure(s).anteriorChamberArea;
      INFO("angle " << angle);
      CHECK(area < previous);
      previous = area;
    }
  }

  TEST_CASE("all fields are non-negative and finite over 100 seeds") {
    oracle::Gen gen(331);
    for (int trial = 0; trial < 100; ++trial) {
      const auto spec = random_spec(gen, gen.uniform(0.0, 10.0));
      const auto s = generate_phantom(spec);
      ClinicalParams p;
      try {
        p = extract_clinical_params(s.image, locate_aca(s.image));
      } catch (const StructureNotFound&) {
        continue;  // localization failure is a separate, measured criterion
      }
      const auto v = p.as_vector();
      for (int i = 0; i < ClinicalParams::kCount; ++i) {
        INFO(ClinicalParams::name(i));
        CHECK(std::isfinite(v[i]));
        CHECK(v[i] >= 0.0);
      }
    }
  }

  TEST_CASE("an ACA outside the image is rejected") {
    const auto s = generate_phantom(PhantomSpec{});
    CHECK_THROWS_AS(extract_clinical_params(s.image, at(-1, 10)), ContractError);
    CHECK_THROWS_AS(extract_clinical_params(s.image, at(10, 200)), ContractError);
  }

  TEST_CASE("parameter names") {
    CHECK(std::string(ClinicalParams::name(0)) == "anteriorChamberWidth");
    CHECK(std::string(ClinicalParams::name(4)) == "anteriorChamberArea");
    CHECK_THROWS(ClinicalParams::name(5));
  }
}
