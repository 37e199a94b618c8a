#pragma once

// On-disk formats:
//   * numbered 8-bit PNG frame directories (frame_%06d.png)
//   * raw planar float container ("TKRF"), used for lossless intermediates,
//     flow fields (two channels u, v) and simulator ground-truth volumes.
//
// Raw container layout, all little-endian:
//   char[4]  magic "TKRF"
//   uint32   width, height, channels, frame_count
//   float32  samples, frame-major, then channel plane, then row-major

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "turbkit/core.hpp"

namespace turbkit::io {

namespace fs = std::filesystem;

inline constexpr char raw_magic[4] = {'T', 'K', 'R', 'F'};
inline constexpr const char* raw_extension = ".tkr";

// 8-bit grey, grey+alpha, palette, RGB, or RGBA. Alpha is dropped.
Frame read_png(const fs::path& path, ColorMode mode);
// 1 or 3 channel frame, samples clamped to [0,1] and rounded to 8 bits.
void write_png(const Frame& frame, const fs::path& path);

std::vector<Frame> read_raw(const fs::path& path);
void write_raw(std::span<const Frame> frames, const fs::path& path);
inline void write_raw(const Frame& frame, const fs::path& path) { write_raw(std::span<const Frame>(&frame, 1), path); }

// Directory of PNG frames, or a single raw container file. Files are ordered by
// the digits embedded in their names, falling back to lexicographic order.
VideoSequence load_sequence(const fs::path& path, ColorMode mode);

// Writes frame_%06d.png into dir (created if missing). Returns written paths.
std::vector<fs::path> save_sequence(const VideoSequence& seq, const fs::path& dir);

void write_mask_png(const MotionMask& mask, const fs::path& path);
MotionMask read_mask_png(const fs::path& path);
std::vector<MotionMask> load_masks(const fs::path& dir);

std::string frame_filename(int index);

}  // namespace turbkit::io
