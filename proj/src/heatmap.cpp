#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include "bfactor/postsel.hpp"

namespace bfactor::postsel {

void write_png_heatmap(const std::string& path, const Matrix& values) {
  const Index rows = values.rows();
  const Index cols = values.cols();
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("heatmap needs a non-empty matrix");
  }
  const double vmin = values.minCoeff();
  const double vmax = values.maxCoeff();
  const double span = vmax - vmin;

  std::vector<png_byte> pixels(static_cast<std::size_t>(rows * cols));
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) {
    row_ptrs[static_cast<std::size_t>(i)] =
        pixels.data() + static_cast<std::size_t>(i * cols);
    for (Index j = 0; j < cols; ++j) {
      const double t = span > 0.0 ? (values(i, j) - vmin) / span : 0.0;
      pixels[static_cast<std::size_t>(i * cols + j)] =
          static_cast<png_byte>(std::lround(255.0 * t));
    }
  }

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(f);
    throw std::runtime_error("png encoding failed for '" + path + "'");
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols),
               static_cast<png_uint_32>(rows), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace bfactor::postsel
