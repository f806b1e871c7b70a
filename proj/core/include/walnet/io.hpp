#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "walnet/data.hpp"
#include "walnet/imaging.hpp"

namespace walnet::io {

/// Decodes an 8- or 16-bit PNG (gray, RGB, or RGBA with alpha dropped).
data::RawImage read_image(const std::filesystem::path& path);

/// Nonzero pixels become 1.
imaging::BinaryMask read_mask(const std::filesystem::path& path);

/// 8-bit PNG, value v written as round(255 v).
void write_image(const std::filesystem::path& path, const imaging::RasterImage& img);
void write_gray(const std::filesystem::path& path, const imaging::ScalarMap& map);
/// 0 / 255 PNG.
void write_mask(const std::filesystem::path& path, const imaging::BinaryMask& mask);
/// 8-bit RGB from interleaved rows*cols*3 bytes.
void write_rgb(const std::filesystem::path& path, int rows, int cols,
               const std::vector<std::uint8_t>& rgb);

std::string read_text(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace walnet::io
