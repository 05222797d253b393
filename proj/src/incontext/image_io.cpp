// Copyright (C) 2026 The incontext Authors
// SPDX-License-Identifier: Apache-2.0

#include "incontext/image_io.hpp"

#include "incontext/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace incontext {
namespace {

std::string lower_ext(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

bool is_netpbm(const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

Raster8 read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw IoError("image_io", "cannot read PNG '" + path.string() + "': " + image.message);
    image.format = PNG_FORMAT_RGBA;
    Raster8 r;
    r.width = image.width;
    r.height = image.height;
    r.channels = 4;
    r.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("image_io", "corrupt PNG '" + path.string() + "': " + msg);
    }
    return r;
}

void write_png(const std::filesystem::path& path, const Raster8& raster) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(raster.width);
    image.height = static_cast<png_uint_32>(raster.height);
    image.format = raster.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, raster.pixels.data(), 0, nullptr))
        throw IoError("image_io", "cannot write PNG '" + path.string() + "': " + image.message);
}

void skip_ws_and_comments(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

Raster8 read_netpbm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("image_io", "cannot open '" + path.string() + "'");
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw FormatError("image_io", "unsupported netpbm type in '" + path.string() + "'");
    std::size_t w = 0, h = 0, maxval = 0;
    skip_ws_and_comments(in);
    in >> w;
    skip_ws_and_comments(in);
    in >> h;
    skip_ws_and_comments(in);
    in >> maxval;
    in.get();
    if (!in || w == 0 || h == 0 || maxval != 255)
        throw FormatError("image_io", "bad netpbm header in '" + path.string() + "' (only 8-bit supported)");
    Raster8 r;
    r.width = w;
    r.height = h;
    r.channels = magic == "P5" ? 1 : 3;
    r.pixels.resize(w * h * r.channels);
    in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(r.pixels.size()))
        throw FormatError("image_io", "truncated netpbm payload in '" + path.string() + "'");
    return r;
}

void write_netpbm(const std::filesystem::path& path, const Raster8& raster) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("image_io", "cannot write '" + path.string() + "'");
    out << (raster.channels == 1 ? "P5" : "P6") << '\n' << raster.width << ' ' << raster.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.pixels.data()), static_cast<std::streamsize>(raster.pixels.size()));
    if (!out) throw IoError("image_io", "short write to '" + path.string() + "'");
}

}  // namespace

Raster8 read_raster(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("image_io", "file not found: '" + path.string() + "'");
    return is_netpbm(path) ? read_netpbm(path) : read_png(path);
}

void write_raster(const std::filesystem::path& path, const Raster8& raster) {
    if (raster.channels != 1 && raster.channels != 3)
        throw InvalidArgument("image_io", "only 1- or 3-channel rasters can be written");
    if (raster.pixels.size() != raster.width * raster.height * raster.channels)
        throw ShapeError("image_io", "raster pixel count does not match its dimensions");
    if (is_netpbm(path))
        write_netpbm(path, raster);
    else
        write_png(path, raster);
}

Tensor image_from_raster(const Raster8& raster) {
    Tensor out({3, raster.height, raster.width});
    const std::size_t n = raster.width * raster.height;
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t src = raster.channels >= 3 ? c : 0;
            out[c * n + p] = raster.pixels[p * raster.channels + src] / 255.0;
        }
    }
    return out;
}

Raster8 raster_from_image(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("image_io", "expected [3,H,W] image, got " + shape_string(image.shape()));
    Raster8 r;
    r.height = image.dim(1);
    r.width = image.dim(2);
    r.channels = 3;
    const std::size_t n = r.width * r.height;
    r.pixels.resize(n * 3);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t c = 0; c < 3; ++c) {
            const double v = std::clamp(image[c * n + p], 0.0, 1.0);
            r.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return r;
}

Tensor load_image(const std::filesystem::path& path) { return image_from_raster(read_raster(path)); }

void save_image(const std::filesystem::path& path, const Tensor& image) { write_raster(path, raster_from_image(image)); }

}  // namespace incontext
