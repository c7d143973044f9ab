#ifndef MSFCN_IMAGE_IO_HPP
#define MSFCN_IMAGE_IO_HPP

// Minimal binary PPM (P6) / PGM (P5) reader and writer. 8-bit only,
// lossless round trip, format errors carry the failing byte offset.

#include <string>

#include "msfcn/tensor.hpp"

namespace msfcn {

// P6 -> (1,3,h,w) tensor with values byte/maxval in [0,1].
Tensor read_image(const std::string& path);

// (1,3,h,w) in [0,1] -> P6, rounded half-up to 0..255.
void write_image(const std::string& path, const Tensor& image);

// P5 -> label grid, one class id per pixel (gray level = class id).
LabelMask read_mask(const std::string& path);

void write_mask(const std::string& path, const LabelMask& mask);

}  // namespace msfcn

#endif
