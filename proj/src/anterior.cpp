#include "mcdn/anterior.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace mcdn {

const char* ClinicalParams::name(int i) {
  static constexpr std::array<const char*, kCount> names{"anteriorChamberWidth", "lensVault", "chamberHeight",
                                                         "irisCurvature", "anteriorChamberArea"};
  return names.at(static_cast<std::size_t>(i));
}

// ---------------------------------------------------------------- split / crop

SplitScan split_and_flip(const Image& scan, const AcaLocation& leftAca, const AcaLocation& rightAca) {
  const Index w = scan.cols();
  const Index h = scan.rows();
  require(w >= 2 && w % 2 == 0, "split_and_flip: scan width must be even");
  const double half = static_cast<double>(w / 2);
  auto inside = [&](const AcaLocation& a) { return a.x >= 0 && a.x < static_cast<double>(w) && a.y >= 0 && a.y < static_cast<double>(h); };
  require(inside(leftAca), "split_and_flip: left ACA outside the scan");
  require(inside(rightAca), "split_and_flip: right ACA outside the scan");
  require(!(leftAca.x > half), "split_and_flip: left ACA lies in the right half");
  require(rightAca.x > half, "split_and_flip: right ACA does not lie in the right half");

  SplitScan out;
  out.left = scan.leftCols(w / 2);
  out.right = flip_horizontal(scan.rightCols(w / 2));
  out.leftAca = leftAca;
  out.leftAca.x = std::min(leftAca.x, half - 1.0);
  out.leftAca.side = EyeSide::Left;
  out.rightAca = rightAca;
  out.rightAca.x = half - 1.0 - (rightAca.x - half);
  out.rightAca.side = EyeSide::Right;
  return out;
}

PatchWindow patch_window(Index width, Index height, Point2 center, Index side) {
  require(side > 0, "crop_patch: side must be positive");
  if (side > width || side > height)
    throw ContractError("crop_patch: image " + std::to_string(width) + "x" + std::to_string(height) +
                        " is smaller than the " + std::to_string(side) + " px patch");
  const Index cx = static_cast<Index>(std::floor(center.x + 0.5));
  const Index cy = static_cast<Index>(std::floor(center.y + 0.5));
  PatchWindow win;
  win.side = side;
  win.x0 = std::clamp<Index>(cx - side / 2, 0, width - side);
  win.y0 = std::clamp<Index>(cy - side / 2, 0, height - side);
  return win;
}

Image crop_patch(const Image& image, Point2 center, Index side) {
  const PatchWindow win = patch_window(image.cols(), image.rows(), center, side);
  return image.block(win.y0, win.x0, side, side);
}

Image crop_patch(const Image& image, const AcaLocation& center, Index side) {
  return crop_patch(image, center.point(), side);
}

// ---------------------------------------------------------------- segmentation

int otsu_threshold(const Image& image) {
  std::array<double, 256> hist{};
  for (Index i = 0; i < image.size(); ++i) hist[image.data()[i]] += 1.0;
  const double total = static_cast<double>(image.size());
  double sum_all = 0.0;
  for (int v = 0; v < 256; ++v) sum_all += v * hist[static_cast<std::size_t>(v)];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int threshold = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[static_cast<std::size_t>(t)];
    sum0 += t * hist[static_cast<std::size_t>(t)];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      threshold = t;
    }
  }
  return best < 0.0 ? 255 : threshold;
}

namespace {

constexpr Index kMinComponentPx = 40;

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace

RidgeSegmentation segment_ridges(const Image& image) {
  RidgeSegmentation seg;
  const Index h = image.rows();
  const Index w = image.cols();
  seg.threshold = otsu_threshold(image);
  seg.labels = Eigen::MatrixXi::Zero(h, w);
  seg.sizes.push_back(0);

  int next = 1;
  std::deque<std::pair<Index, Index>> queue;
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      if (image(y, x) <= seg.threshold || seg.labels(y, x) != 0) continue;
      Index size = 0;
      seg.labels(y, x) = next;
      queue.emplace_back(y, x);
      while (!queue.empty()) {
        const auto [cy, cx] = queue.front();
        queue.pop_front();
        ++size;
        constexpr std::array<std::pair<int, int>, 4> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& [dy, dx] : steps) {
          const Index ny = cy + dy, nx = cx + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          if (image(ny, nx) <= seg.threshold || seg.labels(ny, nx) != 0) continue;
          seg.labels(ny, nx) = next;
          queue.emplace_back(ny, nx);
        }
      }
      seg.sizes.push_back(size);
      ++next;
    }

  for (int id = 1; id < next; ++id)
    if (seg.sizes[static_cast<std::size_t>(id)] >= kMinComponentPx) seg.order.push_back(id);
  std::stable_sort(seg.order.begin(), seg.order.end(),
                   [&](int a, int b) { return seg.sizes[static_cast<std::size_t>(a)] > seg.sizes[static_cast<std::size_t>(b)]; });
  if (seg.order.size() < 2) throw StructureNotFound("fewer than two ridge components");
  seg.cornea = seg.order[0];
  seg.iris = seg.order[1];

  std::vector<double> cornea_px, iris_px, dark_px;
  for (Index y = 1; y + 1 < h; ++y)
    for (Index x = 1; x + 1 < w; ++x) {
      const int id = seg.labels(y, x);
      if (id == 0) {
        dark_px.push_back(image(y, x));
        continue;
      }
      const bool interior = seg.labels(y - 1, x) == id && seg.labels(y + 1, x) == id && seg.labels(y, x - 1) == id &&
                            seg.labels(y, x + 1) == id;
      if (!interior) continue;
      if (id == seg.cornea) cornea_px.push_back(image(y, x));
      if (id == seg.iris) iris_px.push_back(image(y, x));
    }
  seg.darkLevel = median(std::move(dark_px));
  seg.corneaLevel = cornea_px.empty() ? 255.0 : median(std::move(cornea_px));
  seg.irisLevel = iris_px.empty() ? 255.0 : median(std::move(iris_px));
  return seg;
}

// ---------------------------------------------------------------- localization

namespace {

struct ColumnProfile {
  Index x;
  Index y;  // boundary pixel: top-most iris pixel or bottom-most cornea pixel
};

double coverage(const Image& image, Index y, Index x, double dark, double bright) {
  if (y < 0 || y >= image.rows()) return 0.0;
  const double span = std::max(bright - dark, 1.0);
  return std::clamp((static_cast<double>(image(y, x)) - dark) / span, 0.0, 1.0);
}

/// Top-most pixel of component `id` in each column it occupies.
std::vector<ColumnProfile> top_profile(const RidgeSegmentation& seg, int id) {
  std::vector<ColumnProfile> out;
  for (Index x = 0; x < seg.labels.cols(); ++x)
    for (Index y = 0; y < seg.labels.rows(); ++y)
      if (seg.labels(y, x) == id) {
        out.push_back({x, y});
        break;
      }
  return out;
}

/// Bottom-most pixel of component `id` in each column it occupies.
std::vector<ColumnProfile> bottom_profile(const RidgeSegmentation& seg, int id) {
  std::vector<ColumnProfile> out;
  for (Index x = 0; x < seg.labels.cols(); ++x)
    for (Index y = seg.labels.rows() - 1; y >= 0; --y)
      if (seg.labels(y, x) == id) {
        out.push_back({x, y});
        break;
      }
  return out;
}

// Sub-pixel position of a dark-above / bright-below edge whose first bright pixel is y:
// bright coverage of pixels y-1..y+1 summed, measured up from the bottom of pixel y+1.
double top_edge(const Image& im, Index x, Index y, double dark, double bright) {
  double s = 0.0;
  for (Index k = y - 1; k <= y + 1; ++k) s += coverage(im, k, x, dark, bright);
  return static_cast<double>(y) + 1.5 - s;
}

double bottom_edge(const Image& im, Index x, Index y, double dark, double bright) {
  double s = 0.0;
  for (Index k = y - 1; k <= y + 1; ++k) s += coverage(im, k, x, dark, bright);
  return static_cast<double>(y) - 1.5 + s;
}

struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  bool ok = false;
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  LineFit f;
  if (xs.size() < 3) return f;
  const Index n = static_cast<Index>(xs.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = xs[static_cast<std::size_t>(i)];
    b(i) = ys[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(b);
  f.intercept = sol(0);
  f.slope = sol(1);
  f.ok = std::isfinite(f.intercept) && std::isfinite(f.slope);
  return f;
}

}  // namespace

AcaLocation locate_aca(const Image& image) {
  const RidgeSegmentation seg = segment_ridges(image);
  const auto cornea_bottom = bottom_profile(seg, seg.cornea);
  const auto iris_top = top_profile(seg, seg.iris);
  if (cornea_bottom.empty() || iris_top.empty()) throw StructureNotFound("empty ridge profile");

  // Coarse: nearest approach of the facing ridge boundaries.
  double best = std::numeric_limits<double>::infinity();
  Point2 coarse;
  for (const auto& c : cornea_bottom)
    for (const auto& i : iris_top) {
      if (i.y <= c.y) continue;
      const double d = std::hypot(static_cast<double>(c.x - i.x), static_cast<double>(c.y - i.y));
      if (d < best) {
        best = d;
        coarse = {0.5 * static_cast<double>(c.x + i.x), 0.5 * static_cast<double>(c.y + i.y)};
      }
    }
  if (!std::isfinite(best)) throw StructureNotFound("iris ridge does not lie below the cornea");

  AcaLocation loc;
  loc.side = EyeSide::Left;
  const double s2 = static_cast<double>(seg.sizes[static_cast<std::size_t>(seg.iris)]);
  loc.confidence = std::clamp(1.0 - static_cast<double>(seg.third_size()) / s2, 0.0, 1.0);
  loc.x = coarse.x;
  loc.y = coarse.y;

  // Refinement on the straight root portion of the iris.
  const Index iris_x0 = iris_top.front().x;
  const Index iris_n = iris_top.back().x - iris_x0 + 1;
  const Index fit_end = iris_x0 + std::max<Index>(8, (iris_n * 6) / 10);
  std::vector<double> ix, iy, cx, cy;
  for (const auto& p : iris_top) {
    if (p.x < iris_x0 + 2 || p.x > fit_end || p.y < 1) continue;
    ix.push_back(static_cast<double>(p.x));
    iy.push_back(top_edge(image, p.x, p.y, seg.darkLevel, seg.irisLevel));
  }
  for (const auto& p : cornea_bottom) {
    if (p.x < iris_x0 - 40 || p.x > fit_end || p.y + 1 >= image.rows()) continue;
    cx.push_back(static_cast<double>(p.x));
    cy.push_back(bottom_edge(image, p.x, p.y, seg.darkLevel, seg.corneaLevel));
  }
  const LineFit cornea = fit_line(cx, cy);
  const LineFit iris = fit_line(ix, iy);
  if (cornea.ok && iris.ok && std::abs(cornea.slope - iris.slope) > 1e-6) {
    const double x = (iris.intercept - cornea.intercept) / (cornea.slope - iris.slope);
    const double y = cornea.intercept + cornea.slope * x;
    const bool plausible = std::isfinite(x) && x >= 0.0 && x < static_cast<double>(image.cols()) && y >= 0.0 &&
                           y < static_cast<double>(image.rows()) && x <= static_cast<double>(iris_x0) + 2.0;
    if (plausible) {
      loc.x = x;
      loc.y = y;
    }
  }
  return loc;
}

// ---------------------------------------------------------------- clinical parameters

ClinicalParams extract_clinical_params(const Image& image, const AcaLocation& aca) {
  const Index h = image.rows();
  const Index w = image.cols();
  require(aca.x >= 0 && aca.x < static_cast<double>(w) && aca.y >= 0 && aca.y < static_cast<double>(h),
          "extract_clinical_params: ACA outside the image");
  const RidgeSegmentation seg = segment_ridges(image);

  ClinicalParams p;
  const auto iris_top = top_profile(seg, seg.iris);
  if (iris_top.empty()) throw StructureNotFound("empty iris ridge");
  const Index first_col = std::clamp<Index>(static_cast<Index>(std::ceil(aca.x)), 0, w - 1);
  // Scleral-spur row: anterior surface at the iris ridge's peripheral endpoint.
  const Index spur_row = iris_top.front().y;
  double lens_top = std::numeric_limits<double>::quiet_NaN();

  // Cavity per column: below the cornea, above the first other bright structure.
  for (Index x = first_col; x < w; ++x) {
    Index cornea_bottom = -1;
    for (Index y = h - 1; y >= 0; --y)
      if (seg.labels(y, x) == seg.cornea) {
        cornea_bottom = y;
        break;
      }
    if (cornea_bottom < 0) continue;
    const Index top = cornea_bottom + 1;
    Index bottom = -1;
    for (Index y = top; y < h; ++y)
      if (seg.bright(y, x)) {
        if (seg.labels(y, x) != seg.cornea) bottom = y;
        break;
      }
    if (bottom < 0) continue;
    const Index depth = bottom - top;
    p.anteriorChamberArea += static_cast<double>(depth);
    p.chamberHeight = std::max(p.chamberHeight, static_cast<double>(depth));
    if (spur_row >= top && spur_row < bottom) p.anteriorChamberWidth += 1.0;
    if (x == w - 1) lens_top = static_cast<double>(bottom);
  }
  if (!std::isnan(lens_top)) p.lensVault = std::max(0.0, static_cast<double>(spur_row - lens_top));

  // Iris curvature: sagitta / chord of the sub-pixel anterior iris boundary.
  std::vector<Point2> boundary;
  for (const auto& q : iris_top) {
    if (q.x < iris_top.front().x + 2 || q.x > iris_top.back().x - 2 || q.y < 1) continue;
    boundary.push_back({static_cast<double>(q.x), top_edge(image, q.x, q.y, seg.darkLevel, seg.irisLevel)});
  }
  if (boundary.size() >= 3) {
    const Point2 a = boundary.front();
    const Point2 b = boundary.back();
    const double chord = distance(a, b);
    if (chord > 0.0) {
      double sag = 0.0;
      for (const auto& q : boundary) {
        const double cross = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
        sag = std::max(sag, std::abs(cross) / chord);
      }
      p.irisCurvature = sag / chord;
    }
  }
  return p;
}

}  // namespace mcdn
