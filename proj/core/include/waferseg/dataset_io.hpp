#pragma once

#include <string>

#include "waferseg/wafergen.hpp"

namespace waferseg {

// Per-wafer container: magic "WFR1", u16 version, u32 height, u32 width,
// image as little-endian f32 row-major, labels as bytes row-major, then a
// length-prefixed UTF-8 key=value metadata blob (generation config + seed +
// defect summary). Bit-exact round trip; in-memory defect geometry lists are
// not persisted.
void save_wafer(const std::string& path, const WaferSample& sample);
WaferSample load_wafer(const std::string& path);

// One .wfr file per sample plus a "manifest.txt" (file, seed, split,
// is_cluster per line).
void save_dataset(const std::string& dir, const Dataset& dataset);
Dataset load_dataset(const std::string& dir);

// The subset of a loaded dataset belonging to one split ("train" or "val").
std::vector<WaferSample> split_of(const Dataset& dataset, const std::string& split);

std::string wafer_metadata_text(const WaferSample& sample);

}  // namespace waferseg
