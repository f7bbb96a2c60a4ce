#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mslab/volume.hpp"

namespace mslab {

// Single-file NIfTI-1 (.nii, or gzip-compressed .nii.gz).
//
// Reading accepts 8/16/32/64-bit integer and 32/64-bit float scalars in
// either byte order, applies scl_slope/scl_inter, and takes the voxel to
// world mapping from the sform when its code is set, else from the qform,
// else from pixdim alone. Unsupported datatypes or more than three non-unit
// dimensions throw UnsupportedFormat; a malformed header throws ParseError
// with the offending byte offset.
Volume read_volume(const std::filesystem::path& path);

// Writes float32 data with matching sform and qform (code 1). Compression
// follows the ".gz" suffix. The file appears atomically: data goes to a
// temporary file in the same directory that is then renamed over `path`.
void write_volume(const Volume& volume, const std::filesystem::path& path);

// Header fields as stored on disk, for inspection and tests.
struct NiftiHeader {
  std::int16_t dim[8] = {};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  float pixdim[8] = {};
  float vox_offset = 0.0f;
  float scl_slope = 0.0f, scl_inter = 0.0f;
  std::int16_t qform_code = 0, sform_code = 0;
  float quatern[3] = {};
  float qoffset[3] = {};
  float srow[3][4] = {};
  char magic[4] = {};
  bool swapped = false;
};

NiftiHeader read_header(const std::filesystem::path& path);

}  // namespace mslab
