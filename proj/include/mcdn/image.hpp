#pragma once

#include "mcdn/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace mcdn {

/// 8-bit grayscale raster, indexed (row = y, col = x).
using Image = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PGM (P5, maxval 255). Header is written as "P5\n<w> <h>\n255\n".
void write_pgm(const std::filesystem::path& path, const Image& image);
Image read_pgm(const std::filesystem::path& path);

std::string encode_pgm(const Image& image);
Image decode_pgm(const std::string& bytes, const std::string& source = "<memory>");

inline Image flip_horizontal(const Image& image) { return image.rowwise().reverse(); }

/// Bilinear resampling with pixel-center alignment (edge samples clamp).
Eigen::MatrixXf resize_bilinear(const Image& image, Index out_height, Index out_width);

/// Resizes to side x side and maps intensities to [-0.5, 0.5]; writes one
/// (1, side, side) plane into `dest` (a (N,1,side,side) tensor) at batch slot n.
void write_network_input(const Image& image, Index side, TensorF& dest, Index n);

}  // namespace mcdn
