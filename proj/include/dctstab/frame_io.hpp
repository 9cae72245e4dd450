#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dctstab/image.hpp"

namespace dctstab {

enum class FrameFormat { Png, Pnm };

/// How a frame was stored, so output can match input.
struct FrameEncoding {
  FrameFormat format = FrameFormat::Png;
  int bit_depth = 8;  ///< 8 or 16
};

/// Reads a PNG or binary PGM/PPM (P5/P6) file; intensities scaled to [0,1].
/// Throws InputError naming the file on any failure.
Frame read_frame(const std::filesystem::path& path, FrameEncoding* encoding = nullptr);

/// Writes gray or RGB; invalid pixels are written as 0.
void write_frame(const std::filesystem::path& path, const Frame& frame, const FrameEncoding& encoding);

struct FrameDirectory {
  FrameSequence frames;
  std::vector<std::string> names;
  FrameEncoding encoding;
};

/// All .png/.pgm/.ppm files of a directory in lexicographic order. Requires at
/// least `min_frames` frames of equal size and a single encoding.
FrameDirectory read_frame_dir(const std::filesystem::path& dir, size_t min_frames = 2);

void write_frame_dir(const std::filesystem::path& dir, const FrameSequence& frames,
                     const std::vector<std::string>& names, const FrameEncoding& encoding);

/// "frame_00000.png" style names.
std::vector<std::string> numbered_names(size_t count, const FrameEncoding& encoding);

}  // namespace dctstab
