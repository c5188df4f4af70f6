#pragma once

#include "cellpheno/types.hpp"

#include <filesystem>

namespace cellpheno::io {

struct Rgb8 {
  PlaneU8 r, g, b;
};

/// Reads an 8-bit RGB raster. PNG (any libpng-readable layout, converted to
/// RGB8) or baseline uncompressed TIFF, chosen by file magic.
Rgb8 read_rgb8(const std::filesystem::path& path);

/// Writes 8-bit RGB. Extension selects the container: .png, or .tif/.tiff
/// (baseline uncompressed).
void write_rgb8(const std::filesystem::path& path, const PlaneU8& r, const PlaneU8& g,
                const PlaneU8& b);

// 16-bit single-channel PNG, used for instance label rasters.
PlaneU16 read_gray16_png(const std::filesystem::path& path);
void write_gray16_png(const std::filesystem::path& path, const PlaneU16& img);

// 32-bit float single-channel TIFF (debug dumps of deconvolved/enhanced maps).
void write_gray_f32_tiff(const std::filesystem::path& path, const PlaneD& img);
PlaneD read_gray_f32_tiff(const std::filesystem::path& path);

}  // namespace cellpheno::io
