// Copyright 2026 The lowshot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lowshot/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

// jpeglib.h needs size_t/FILE declared first.
#include <jpeglib.h>

#include "lowshot/common.hpp"

namespace lowshot {

Raster crop_resize(const Raster& src, double y0, double x0, double crop_h, double crop_w,
                   int out_h, int out_w) {
  if (src.empty()) throw DataError("crop_resize: empty source raster");
  if (out_h < 1 || out_w < 1) throw DataError("crop_resize: output size must be >= 1");
  Raster out(out_h, out_w);
  const double sy_scale = crop_h / out_h;
  const double sx_scale = crop_w / out_w;
  const int max_y = src.height - 1;
  const int max_x = src.width - 1;
  for (int oy = 0; oy < out_h; ++oy) {
    double sy = y0 + (oy + 0.5) * sy_scale - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(max_y));
    const int ya = static_cast<int>(std::floor(sy));
    const int yb = std::min(ya + 1, max_y);
    const double wy = sy - ya;
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = x0 + (ox + 0.5) * sx_scale - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(max_x));
      const int xa = static_cast<int>(std::floor(sx));
      const int xb = std::min(xa + 1, max_x);
      const double wx = sx - xa;
      for (int c = 0; c < 3; ++c) {
        const double top = src.at(ya, xa, c) * (1.0 - wx) + src.at(ya, xb, c) * wx;
        const double bot = src.at(yb, xa, c) * (1.0 - wx) + src.at(yb, xb, c) * wx;
        const double v = top * (1.0 - wy) + bot * wy;
        out.at(oy, ox, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

namespace {

Raster read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot decode image '" + path + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw DataError("cannot decode image '" + path + "': zero-sized image");
  }
  Raster out(static_cast<int>(image.height), static_cast<int>(image.width));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode image '" + path + "': " + msg);
  }
  if (image.warning_or_error & PNG_IMAGE_ERROR) {
    throw DataError("cannot decode image '" + path + "': " + image.message);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Warnings (msg_level < 0) include premature end of data; they are fatal here.
void jpeg_message(j_common_ptr cinfo, int msg_level) {
  if (msg_level < 0) jpeg_fail(cinfo);
}

Raster read_jpeg(const std::string& path) {
  std::FILE* file = std::fopen(path.c_str(), "rb");
  if (!file) throw DataError("cannot open image '" + path + "'");
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> guard(file, &std::fclose);

  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = &jpeg_fail;
  err.base.emit_message = &jpeg_message;
  Raster out;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw DataError("cannot decode image '" + path + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out = Raster(static_cast<int>(cinfo.output_height), static_cast<int>(cinfo.output_width));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return out;
}

}  // namespace

Raster read_image(const std::string& path) {
  unsigned char sig[8] = {0};
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open image '" + path + "'");
    in.read(reinterpret_cast<char*>(sig), sizeof sig);
    if (in.gcount() < 3) throw DataError("cannot decode image '" + path + "': file too short");
  }
  if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (sig[0] == 0xFF && sig[1] == 0xD8 && sig[2] == 0xFF) return read_jpeg(path);
  throw DataError("cannot decode image '" + path + "': unrecognized format (expected PNG or JPEG)");
}

void write_png(const std::string& path, const Raster& img) {
  if (img.empty()) throw DataError("write_png: empty raster");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw RunError("cannot write PNG '" + path + "': " + image.message);
  }
}

}  // namespace lowshot
