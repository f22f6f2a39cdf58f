#pragma once

#include "fuse4d/metrics.hpp"
#include "fuse4d/types.hpp"

#include <filesystem>

namespace fuse4d::io {

// --- image codecs -----------------------------------------------------------

/// Binary PGM, magic "P5", maxval 65535, big-endian 16-bit samples; the
/// normalized intensity is scaled by 65535 and rounded to nearest.
void write_pgm16(const IntensityFrame& frame, const std::filesystem::path& path);
IntensityFrame read_pgm16(const std::filesystem::path& path);

/// PFM, magic "Pf", 32-bit floats in mm, rows bottom-to-top. The writer emits
/// scale -1.0 (little-endian); the reader also accepts positive scales
/// (big-endian) and byte-swaps. Invalid pixels are stored as 0.0 and
/// re-masked on load. Negative or non-finite samples are rejected.
void write_pfm(const DepthFrame& frame, const std::filesystem::path& path);
DepthFrame read_pfm(const std::filesystem::path& path);

// --- sequences ---------------------------------------------------------------

/// Writes manifest.txt ("key = value" lines plus an ordered frame list),
/// one PGM and one PFM per frame. Deterministic: identical sequences yield
/// byte-identical trees.
void write_sequence(const Sequence& seq, const std::filesystem::path& dir);

/// Loads a sequence directory; any inconsistency between the manifest and
/// the frame files is a hard error naming the file and byte offset.
Sequence read_sequence(const std::filesystem::path& dir);

// --- reports -----------------------------------------------------------------

/// RFC-4180-style CSV with a fixed, documented column order (the header
/// row), "." decimal separator and 9 significant digits. NaN metrics are
/// serialized as "nan" and flagged in the status column.
void write_report(const metrics::MetricsReport& report, const std::filesystem::path& path);
metrics::MetricsReport read_report(const std::filesystem::path& path);

}  // namespace fuse4d::io
