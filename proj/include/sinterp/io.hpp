#pragma once

// File formats.
//
// SPTB container, all integers and floats little-endian:
//
//   offset  size      field
//   0       8         magic "SPTB0001" ("SPTB" + 4-digit version)
//   8       1         kind: 0 image, 1 sinogram
//   9       1         dtype: 0 f32
//   10      1         ndim (2)
//   11      1         zero
//   12      4*ndim    dims, u32: image [height, width], sinogram [angles, bins]
//   ..      24        geometry, 3 x f64: image (pixel_size, 0, 0),
//                     sinogram (start_angle_deg, angular_range_deg, bin_width)
//   ..      4*prod    f32 payload, row-major
//
// Readers check every field and the payload length against the file size
// before allocating.

#include "sinterp/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sinterp {

using TomoData = std::variant<Image, Sinogram>;

std::vector<std::uint8_t> encode_tomo(const Image& image);
std::vector<std::uint8_t> encode_tomo(const Sinogram& sinogram);
TomoData decode_tomo(std::span<const std::uint8_t> bytes, const std::string& context = "sptb");

void write_tomo(const std::filesystem::path& path, const Image& image);
void write_tomo(const std::filesystem::path& path, const Sinogram& sinogram);
TomoData read_tomo(const std::filesystem::path& path);

/// read_tomo that insists on one kind; ValidationError otherwise.
Image read_image(const std::filesystem::path& path);
Sinogram read_sinogram(const std::filesystem::path& path);

enum class RawDtype
{
    F32LE,
    U16LE,
};

/// Headerless n_angles x n_bins row-major payload. LengthMismatch when the file
/// size is not n_angles*n_bins*sizeof(dtype), NegativeValue on negative or
/// non-finite samples.
Sinogram import_raw(const std::filesystem::path& path, std::int64_t n_angles, std::int64_t n_bins, RawDtype dtype,
                    double start_angle_deg = 0.0, double angular_range_deg = 360.0, double bin_width = 1.0);

/// Binary 16-bit PGM ("P5", maxval 65535, big-endian samples). Values map
/// linearly from [min, max] to [0, 65535]; a constant grid maps to 32768.
std::vector<std::uint8_t> encode_pgm(const GridView& grid);
void export_pgm(const GridView& grid, const std::filesystem::path& path);

/// One line of a dataset manifest (JSON lines). Paths are stored relative to
/// the manifest's directory and resolved on read.
struct ManifestEntry
{
    std::filesystem::path input;
    std::filesystem::path target;
    std::filesystem::path phantom;
    std::uint64_t seed = 0;  // dataset seed
    std::uint64_t index = 0; // item index within that seed
    std::string noise;

    bool operator==(const ManifestEntry&) const = default;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
/// Paths in the result are absolute or relative to the working directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

} // namespace sinterp
