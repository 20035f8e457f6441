#include "symphony/frame_loader.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <jpeglib.h>

namespace symphony {

namespace {

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void on_jpeg_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

struct DecodedImage {
  ImageSize size;
  std::vector<unsigned char> rgb;
};

struct RawDecode {
  unsigned char* rgb = nullptr;  // malloc'd, RGB rows
  int width = 0;
  int height = 0;
};

// libjpeg reports errors through longjmp; only raw C state lives across the
// setjmp point. Returns false with `message` filled on failure.
bool decode_raw(const unsigned char* data, std::size_t size, bool header_only, RawDecode* out,
                char* message) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_jpeg_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::free(out->rgb);
    out->rgb = nullptr;
    std::snprintf(message, JMSG_LENGTH_MAX, "%s", err.message);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data, static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  out->width = static_cast<int>(cinfo.image_width);
  out->height = static_cast<int>(cinfo.image_height);
  if (!header_only) {
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const auto stride = static_cast<std::size_t>(cinfo.output_width) * 3;
    out->rgb = static_cast<unsigned char*>(std::malloc(stride * cinfo.output_height));
    while (cinfo.output_scanline < cinfo.output_height) {
      JSAMPROW row = out->rgb + stride * cinfo.output_scanline;
      jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
  }
  jpeg_destroy_decompress(&cinfo);
  return true;
}

DecodedImage decode_jpeg(std::string_view jpeg, bool header_only) {
  RawDecode raw;
  char message[JMSG_LENGTH_MAX] = {};
  if (!decode_raw(reinterpret_cast<const unsigned char*>(jpeg.data()), jpeg.size(), header_only,
                  &raw, message)) {
    throw Error(ErrorCode::FrameLoadError, fmt::format("JPEG decode failed: {}", message));
  }
  DecodedImage out;
  out.size = {raw.width, raw.height};
  if (raw.rgb) {
    out.rgb.assign(raw.rgb, raw.rgb + static_cast<std::size_t>(raw.width) * raw.height * 3);
    std::free(raw.rgb);
  }
  return out;
}

// Box filter: each output pixel averages the source pixels it covers.
std::vector<unsigned char> area_resize(const DecodedImage& src, ImageSize dst) {
  std::vector<unsigned char> out(static_cast<std::size_t>(dst.width) * dst.height * 3);
  const double sx = static_cast<double>(src.size.width) / dst.width;
  const double sy = static_cast<double>(src.size.height) / dst.height;
  for (int y = 0; y < dst.height; ++y) {
    const int y0 = static_cast<int>(std::floor(y * sy));
    const int y1 = std::max(y0 + 1, std::min(src.size.height, static_cast<int>(std::ceil((y + 1) * sy))));
    for (int x = 0; x < dst.width; ++x) {
      const int x0 = static_cast<int>(std::floor(x * sx));
      const int x1 = std::max(x0 + 1, std::min(src.size.width, static_cast<int>(std::ceil((x + 1) * sx))));
      unsigned long acc[3] = {0, 0, 0};
      for (int yy = y0; yy < y1; ++yy) {
        const unsigned char* row = src.rgb.data() + (static_cast<std::size_t>(yy) * src.size.width + x0) * 3;
        for (int xx = x0; xx < x1; ++xx, row += 3) {
          acc[0] += row[0];
          acc[1] += row[1];
          acc[2] += row[2];
        }
      }
      const auto n = static_cast<unsigned long>((y1 - y0) * (x1 - x0));
      unsigned char* px = out.data() + (static_cast<std::size_t>(y) * dst.width + x) * 3;
      for (int c = 0; c < 3; ++c) px[c] = static_cast<unsigned char>((acc[c] + n / 2) / n);
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::FrameLoadError, fmt::format("cannot read frame '{}'", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ImageSize capped_size(ImageSize size, FrameSizeCap cap) {
  const int long_side = std::max(size.width, size.height);
  const int short_side = std::min(size.width, size.height);
  if (long_side <= cap.long_side && short_side <= cap.short_side) return size;
  const double scale = std::min(static_cast<double>(cap.long_side) / long_side,
                                static_cast<double>(cap.short_side) / short_side);
  return {std::max(1, static_cast<int>(std::lround(size.width * scale))),
          std::max(1, static_cast<int>(std::lround(size.height * scale)))};
}

ImageSize jpeg_size(std::string_view jpeg) { return decode_jpeg(jpeg, true).size; }

std::string encode_jpeg_rgb(const unsigned char* rgb, ImageSize size, int quality) {
  jpeg_compress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = on_jpeg_error;
  unsigned char* buffer = nullptr;
  unsigned long buffer_size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw Error(ErrorCode::FrameLoadError, fmt::format("JPEG encode failed: {}", err.message));
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &buffer_size);
  cinfo.image_width = static_cast<JDIMENSION>(size.width);
  cinfo.image_height = static_cast<JDIMENSION>(size.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const auto stride = static_cast<std::size_t>(size.width) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<unsigned char*>(rgb + stride * cinfo.next_scanline);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::string out(reinterpret_cast<const char*>(buffer), buffer_size);
  std::free(buffer);
  return out;
}

EncodedImage load_frame_capped(const Frame& frame, FrameSizeCap cap) {
  auto bytes = read_file(frame.path);
  const auto size = jpeg_size(bytes);
  const auto target = capped_size(size, cap);
  if (target.width == size.width && target.height == size.height) {
    return {"image/jpeg", std::move(bytes)};
  }
  const auto decoded = decode_jpeg(bytes, false);
  const auto resized = area_resize(decoded, target);
  return {"image/jpeg", encode_jpeg_rgb(resized.data(), target)};
}

}  // namespace symphony
