#include "mcdn/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mcdn {

std::string encode_pgm(const Image& image) {
  std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.data()), static_cast<std::size_t>(image.size()));
  return out;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ImageIoError(path.string() + ": cannot open for writing");
  const std::string bytes = encode_pgm(image);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw ImageIoError(path.string() + ": write failed");
}

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
bool next_token(const std::string& s, std::size_t& pos, std::string& token) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < s.size() && !std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  token = s.substr(start, pos - start);
  return !token.empty();
}

long parse_positive(const std::string& token, const std::string& source, const char* field) {
  if (token.empty() || !std::all_of(token.begin(), token.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw ImageIoError(source + ": malformed PGM header (" + field + " '" + token + "')");
  const long v = std::stol(token);
  if (v <= 0) throw ImageIoError(source + ": malformed PGM header (" + field + " must be positive)");
  return v;
}

}  // namespace

Image decode_pgm(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0;
  std::string magic, w_tok, h_tok, max_tok;
  if (!next_token(bytes, pos, magic) || magic != "P5")
    throw ImageIoError(source + ": malformed PGM header (expected magic P5)");
  if (!next_token(bytes, pos, w_tok) || !next_token(bytes, pos, h_tok) || !next_token(bytes, pos, max_tok))
    throw ImageIoError(source + ": malformed PGM header (truncated)");
  const long width = parse_positive(w_tok, source, "width");
  const long height = parse_positive(h_tok, source, "height");
  const long maxval = parse_positive(max_tok, source, "maxval");
  if (maxval != 255) throw ImageIoError(source + ": unsupported PGM maxval " + max_tok + " (expected 255)");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw ImageIoError(source + ": malformed PGM header (missing separator before raster)");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < need)
    throw ImageIoError(source + ": truncated PGM raster (" + std::to_string(bytes.size() - pos) + " of " +
                       std::to_string(need) + " bytes)");
  Image image(height, width);
  std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + pos), need, image.data());
  return image;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ImageIoError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode_pgm(ss.str(), path.string());
}

Eigen::MatrixXf resize_bilinear(const Image& image, Index out_height, Index out_width) {
  require(out_height > 0 && out_width > 0, "resize_bilinear: output size must be positive");
  require(image.size() > 0, "resize_bilinear: empty image");
  Eigen::MatrixXf out(out_height, out_width);
  const double sy = static_cast<double>(image.rows()) / static_cast<double>(out_height);
  const double sx = static_cast<double>(image.cols()) / static_cast<double>(out_width);
  const Index max_y = image.rows() - 1;
  const Index max_x = image.cols() - 1;
  for (Index oy = 0; oy < out_height; ++oy) {
    const double fy = std::clamp((static_cast<double>(oy) + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
    const Index y0 = static_cast<Index>(std::floor(fy));
    const Index y1 = std::min(y0 + 1, max_y);
    const double ty = fy - static_cast<double>(y0);
    for (Index ox = 0; ox < out_width; ++ox) {
      const double fx = std::clamp((static_cast<double>(ox) + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
      const Index x0 = static_cast<Index>(std::floor(fx));
      const Index x1 = std::min(x0 + 1, max_x);
      const double tx = fx - static_cast<double>(x0);
      const double top = (1 - tx) * image(y0, x0) + tx * image(y0, x1);
      const double bottom = (1 - tx) * image(y1, x0) + tx * image(y1, x1);
      out(oy, ox) = static_cast<float>((1 - ty) * top + ty * bottom);
    }
  }
  return out;
}

void write_network_input(const Image& image, Index side, TensorF& dest, Index n) {
  require(dest.rank() == 4 && dest.dim(1) == 1 && dest.dim(2) == side && dest.dim(3) == side,
          "network input: destination must be (N,1," + std::to_string(side) + "," + std::to_string(side) + "), got " +
              shape_string(dest.dims()));
  require(n >= 0 && n < dest.dim(0), "network input: batch slot out of range");
  const Eigen::MatrixXf resized = resize_bilinear(image, side, side);
  float* plane = dest.data() + n * side * side;
  for (Index y = 0; y < side; ++y)
    for (Index x = 0; x < side; ++x) plane[y * side + x] = resized(y, x) / 255.0f - 0.5f;
}

}  // namespace mcdn
