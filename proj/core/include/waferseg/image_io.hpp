#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "waferseg/tensor.hpp"

namespace waferseg {

// Fixed palette for class maps: background dark blue, in-spec turquoise,
// defect yellow.
inline constexpr std::array<std::array<uint8_t, 3>, 3> kClassPalette = {{
    {16, 24, 96},    // 0 background / marker
    {64, 224, 208},  // 1 in-spec
    {255, 214, 0},   // 2 defect
}};

// Grayscale image as binary PGM (P5). Values are clamped to [0,1] then scaled
// to 0..255.
void write_pgm(const std::string& path, const std::vector<double>& image, int height, int width);

// Class map as binary PPM (P6) using kClassPalette.
void write_class_ppm(const std::string& path, const std::vector<uint8_t>& labels, int height,
                     int width);
void write_class_ppm(const std::string& path, const LabelMap& labels);

// Prediction-vs-truth map: agreements keep the palette color at half
// brightness, disagreements are drawn full-bright in the predicted class color
// with a red tint.
void write_diff_ppm(const std::string& path, const LabelMap& predicted, const LabelMap& truth);

}  // namespace waferseg
