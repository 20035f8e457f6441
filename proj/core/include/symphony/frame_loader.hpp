#pragma once

#include "symphony/wire.hpp"

#include <string>
#include <string_view>

namespace symphony {

struct FrameSizeCap {
  int long_side = 1280;
  int short_side = 720;
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// Size that fits `size` inside the cap with aspect ratio preserved; the
/// input itself when it already fits.
ImageSize capped_size(ImageSize size, FrameSizeCap cap = {});

/// Reads a JPEG frame from disk. Frames larger than 720p are decoded,
/// downscaled with an area filter and re-encoded; smaller ones are passed
/// through byte for byte. Throws FrameLoadError.
EncodedImage load_frame_capped(const Frame& frame, FrameSizeCap cap = {});

/// JPEG helpers exposed for tests and the extract tool.
ImageSize jpeg_size(std::string_view jpeg);
std::string encode_jpeg_rgb(const unsigned char* rgb, ImageSize size, int quality = 90);

}  // namespace symphony
