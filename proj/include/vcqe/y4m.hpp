#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vcqe/frame.hpp"
#include "vcqe/tensor.hpp"

namespace vcqe {

// 8-bit planar 4:2:0 image as exchanged with video codecs.
struct Yuv420Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> y, cb, cr;
};

namespace yuv {

inline std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v + 0.5));
}

// BT.601 limited-range RGB -> YCbCr, chroma 2x2 box-averaged.
inline Yuv420Image rgb_to_yuv420(const Tensor<float>& rgb) {
    check(rgb.ndim() == 3 && rgb.dim(2) == 3, "rgb_to_yuv420: tensor must be H x W x 3");
    const int h = rgb.dim(0), w = rgb.dim(1);
    check(h % 2 == 0 && w % 2 == 0, "rgb_to_yuv420: dims must be even for 4:2:0");
    Yuv420Image out;
    out.width = w;
    out.height = h;
    out.y.resize(static_cast<std::size_t>(h) * w);
    out.cb.resize(static_cast<std::size_t>(h / 2) * (w / 2));
    out.cr.resize(static_cast<std::size_t>(h / 2) * (w / 2));

    std::vector<double> cb_full(static_cast<std::size_t>(h) * w);
    std::vector<double> cr_full(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double r = rgb.at3(y, x, 0), g = rgb.at3(y, x, 1), b = rgb.at3(y, x, 2);
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            out.y[i] = clamp_byte(16.0 + 65.481 * r + 128.553 * g + 24.966 * b);
            cb_full[i] = 128.0 - 37.797 * r - 74.203 * g + 112.0 * b;
            cr_full[i] = 128.0 + 112.0 * r - 93.786 * g - 18.214 * b;
        }
    for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) {
            const std::size_t i00 = static_cast<std::size_t>(2 * y) * w + 2 * x;
            const std::size_t i01 = i00 + 1;
            const std::size_t i10 = i00 + w;
            const std::size_t i11 = i10 + 1;
            const std::size_t o = static_cast<std::size_t>(y) * (w / 2) + x;
            out.cb[o] = clamp_byte((cb_full[i00] + cb_full[i01] + cb_full[i10] + cb_full[i11]) / 4.0);
            out.cr[o] = clamp_byte((cr_full[i00] + cr_full[i01] + cr_full[i10] + cr_full[i11]) / 4.0);
        }
    return out;
}

// Inverse conversion; chroma upsampled by replication.
inline Tensor<float> yuv420_to_rgb(const Yuv420Image& img) {
    const int h = img.height, w = img.width;
    Tensor<float> out({h, w, 3});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double yy = (img.y[static_cast<std::size_t>(y) * w + x] - 16.0) / 219.0;
            const std::size_t co = static_cast<std::size_t>(y / 2) * (w / 2) + x / 2;
            const double cb = (img.cb[co] - 128.0) / 224.0;
            const double cr = (img.cr[co] - 128.0) / 224.0;
            double r = yy + 1.402 * cr;
            double g = yy - 0.344136 * cb - 0.714136 * cr;
            double b = yy + 1.772 * cb;
            out.at3(y, x, 0) = static_cast<float>(r < 0 ? 0 : (r > 1 ? 1 : r));
            out.at3(y, x, 1) = static_cast<float>(g < 0 ? 0 : (g > 1 ? 1 : g));
            out.at3(y, x, 2) = static_cast<float>(b < 0 ? 0 : (b > 1 ? 1 : b));
        }
    return out;
}

}  // namespace yuv

inline void write_y4m(const std::string& path, const std::vector<Yuv420Image>& frames) {
    check(!frames.empty(), "write_y4m: no frames");
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "write_y4m: cannot open " + path);
    os << "YUV4MPEG2 W" << frames[0].width << " H" << frames[0].height
       << " F25:1 Ip A1:1 C420jpeg\n";
    for (const auto& f : frames) {
        check(f.width == frames[0].width && f.height == frames[0].height,
              "write_y4m: frame dims differ");
        os << "FRAME\n";
        os.write(reinterpret_cast<const char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
        os.write(reinterpret_cast<const char*>(f.cb.data()), static_cast<std::streamsize>(f.cb.size()));
        os.write(reinterpret_cast<const char*>(f.cr.data()), static_cast<std::streamsize>(f.cr.size()));
    }
    check(os.good(), "write_y4m: write failed for " + path);
}

inline std::vector<Yuv420Image> read_y4m(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "read_y4m: cannot open " + path);
    std::string header;
    std::getline(is, header);
    check(header.rfind("YUV4MPEG2", 0) == 0, "read_y4m: missing YUV4MPEG2 signature in " + path);

    int w = 0, h = 0;
    std::istringstream hs(header);
    std::string tok;
    std::string chroma = "420";
    while (hs >> tok) {
        if (tok.size() < 2) continue;
        if (tok[0] == 'W') w = std::stoi(tok.substr(1));
        if (tok[0] == 'H') h = std::stoi(tok.substr(1));
        if (tok[0] == 'C') chroma = tok.substr(1);
    }
    check(w > 0 && h > 0, "read_y4m: bad dimensions in header: " + header);
    check(chroma.rfind("420", 0) == 0, "read_y4m: only 4:2:0 supported, got C" + chroma);
    check(w % 2 == 0 && h % 2 == 0, "read_y4m: odd dimensions");

    std::vector<Yuv420Image> frames;
    const std::size_t ysize = static_cast<std::size_t>(w) * h;
    const std::size_t csize = ysize / 4;
    std::string line;
    while (std::getline(is, line)) {
        check(line.rfind("FRAME", 0) == 0, "read_y4m: expected FRAME marker");
        Yuv420Image f;
        f.width = w;
        f.height = h;
        f.y.resize(ysize);
        f.cb.resize(csize);
        f.cr.resize(csize);
        is.read(reinterpret_cast<char*>(f.y.data()), static_cast<std::streamsize>(ysize));
        is.read(reinterpret_cast<char*>(f.cb.data()), static_cast<std::streamsize>(csize));
        is.read(reinterpret_cast<char*>(f.cr.data()), static_cast<std::streamsize>(csize));
        check(is.gcount() == static_cast<std::streamsize>(csize), "read_y4m: truncated frame");
        frames.push_back(std::move(f));
    }
    return frames;
}

}  // namespace vcqe
