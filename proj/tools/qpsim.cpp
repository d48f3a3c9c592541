// Constant-QP codec simulator for pipeline tests and offline experiments
// where no HEVC encoder is installed. Reads y4m, applies 8x8 DCT-domain
// quantization with the HEVC step-size relation Qstep = 2^((QP-4)/6), using
// intra coding for the first frame and zero-motion temporal prediction for
// the rest, optionally with a deblocking filter inside the prediction loop.
// Writes y4m and prints one "frame N type X" line per frame.

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "vcqe/y4m.hpp"

namespace {

constexpr int kBlock = 8;

struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane from_bytes(const std::vector<std::uint8_t>& bytes, int w, int h) {
    Plane p;
    p.w = w;
    p.h = h;
    p.v.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) p.v[i] = bytes[i];
    return p;
}

std::vector<std::uint8_t> to_bytes(const Plane& p) {
    std::vector<std::uint8_t> out(p.v.size());
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        double x = p.v[i];
        out[i] = static_cast<std::uint8_t>(x < 0 ? 0 : (x > 255 ? 255 : x + 0.5));
    }
    return out;
}

// Orthonormal 8x8 DCT-II basis.
const std::array<std::array<double, kBlock>, kBlock>& dct_basis() {
    static const auto basis = [] {
        std::array<std::array<double, kBlock>, kBlock> m{};
        for (int k = 0; k < kBlock; ++k) {
            const double scale = k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
            for (int n = 0; n < kBlock; ++n)
                m[k][n] = scale * std::cos(M_PI * (2 * n + 1) * k / (2.0 * kBlock));
        }
        return m;
    }();
    return basis;
}

void quantize_plane(Plane& p, double qstep) {
    const auto& B = dct_basis();
    for (int by = 0; by < p.h; by += kBlock) {
        for (int bx = 0; bx < p.w; bx += kBlock) {
            double block[kBlock][kBlock];
            for (int y = 0; y < kBlock; ++y)
                for (int x = 0; x < kBlock; ++x) {
                    const int sy = std::min(by + y, p.h - 1);
                    const int sx = std::min(bx + x, p.w - 1);
                    block[y][x] = p.at(sy, sx);
                }
            // separable DCT, quantize, inverse
            double tmp[kBlock][kBlock], coef[kBlock][kBlock];
            for (int y = 0; y < kBlock; ++y)
                for (int k = 0; k < kBlock; ++k) {
                    double s = 0;
                    for (int x = 0; x < kBlock; ++x) s += B[k][x] * block[y][x];
                    tmp[y][k] = s;
                }
            for (int k = 0; k < kBlock; ++k)
                for (int j = 0; j < kBlock; ++j) {
                    double s = 0;
                    for (int y = 0; y < kBlock; ++y) s += B[j][y] * tmp[y][k];
                    coef[j][k] = qstep * std::round(s / qstep);
                }
            for (int j = 0; j < kBlock; ++j)
                for (int x = 0; x < kBlock; ++x) {
                    double s = 0;
                    for (int k = 0; k < kBlock; ++k) s += B[k][x] * coef[j][k];
                    tmp[j][x] = s;
                }
            for (int y = 0; y < kBlock; ++y)
                for (int x = 0; x < kBlock; ++x) {
                    if (by + y >= p.h || bx + x >= p.w) continue;
                    double s = 0;
                    for (int j = 0; j < kBlock; ++j) s += B[j][y] * tmp[j][x];
                    p.at(by + y, bx + x) = s;
                }
        }
    }
}

// Smooths small discontinuities across block boundaries; strong edges
// (above 2*qstep) are left alone.
void deblock_plane(Plane& p, double qstep) {
    const double thr = 2.0 * qstep;
    for (int x = kBlock; x < p.w; x += kBlock)
        for (int y = 0; y < p.h; ++y) {
            const double p1 = p.at(y, std::max(x - 2, 0)), p0 = p.at(y, x - 1);
            const double q0 = p.at(y, x), q1 = p.at(y, std::min(x + 1, p.w - 1));
            if (std::abs(p0 - q0) < thr) {
                p.at(y, x - 1) = (p1 + 2 * p0 + q0) / 4.0;
                p.at(y, x) = (q1 + 2 * q0 + p0) / 4.0;
            }
        }
    for (int y = kBlock; y < p.h; y += kBlock)
        for (int x = 0; x < p.w; ++x) {
            const double p1 = p.at(std::max(y - 2, 0), x), p0 = p.at(y - 1, x);
            const double q0 = p.at(y, x), q1 = p.at(std::min(y + 1, p.h - 1), x);
            if (std::abs(p0 - q0) < thr) {
                p.at(y - 1, x) = (p1 + 2 * p0 + q0) / 4.0;
                p.at(y, x) = (q1 + 2 * q0 + p0) / 4.0;
            }
        }
}

void code_plane(Plane& cur, const Plane* ref, double qstep) {
    if (ref) {
        for (std::size_t i = 0; i < cur.v.size(); ++i) cur.v[i] -= ref->v[i];
        quantize_plane(cur, qstep);
        for (std::size_t i = 0; i < cur.v.size(); ++i) cur.v[i] += ref->v[i];
    } else {
        quantize_plane(cur, qstep);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constant-QP DCT quantization codec simulator (y4m in, y4m out)"};
    std::string in_path, out_path;
    int qp = 32;
    int lf = 0;
    app.add_option("--in", in_path, "input y4m")->required();
    app.add_option("--out", out_path, "output y4m")->required();
    app.add_option("--qp", qp, "quantization parameter (0..51)")->check(CLI::Range(0, 51));
    app.add_option("--lf", lf, "1 = deblocking filter in the prediction loop")
        ->check(CLI::Range(0, 1));
    CLI11_PARSE(app, argc, argv);

    try {
        const double qstep = std::pow(2.0, (qp - 4.0) / 6.0);
        std::vector<vcqe::Yuv420Image> frames = vcqe::read_y4m(in_path);

        Plane ref_y, ref_cb, ref_cr;
        bool have_ref = false;
        for (std::size_t t = 0; t < frames.size(); ++t) {
            auto& f = frames[t];
            Plane y = from_bytes(f.y, f.width, f.height);
            Plane cb = from_bytes(f.cb, f.width / 2, f.height / 2);
            Plane cr = from_bytes(f.cr, f.width / 2, f.height / 2);

            code_plane(y, have_ref ? &ref_y : nullptr, qstep);
            code_plane(cb, have_ref ? &ref_cb : nullptr, qstep);
            code_plane(cr, have_ref ? &ref_cr : nullptr, qstep);
            if (lf) {
                deblock_plane(y, qstep);
                deblock_plane(cb, qstep);
                deblock_plane(cr, qstep);
            }

            f.y = to_bytes(y);
            f.cb = to_bytes(cb);
            f.cr = to_bytes(cr);
            // the emitted 8-bit frame is the reference for the next one
            ref_y = from_bytes(f.y, f.width, f.height);
            ref_cb = from_bytes(f.cb, f.width / 2, f.height / 2);
            ref_cr = from_bytes(f.cr, f.width / 2, f.height / 2);
            have_ref = true;
            std::cout << "frame " << t << " type " << (t == 0 ? 'I' : 'P') << "\n";
        }
        vcqe::write_y4m(out_path, frames);
    } catch (const std::exception& e) {
        std::cerr << "qpsim: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
