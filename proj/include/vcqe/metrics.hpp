#pragma once

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "vcqe/dataset.hpp"
#include "vcqe/frame.hpp"
#include "vcqe/png_io.hpp"
#include "vcqe/tensor.hpp"

namespace vcqe {

// Peak signal-to-noise ratio in dB for values in [0,1], MSE pooled over all
// pixels and channels. Identical inputs give +infinity; callers flag and
// exclude those from averages.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.same_dims(b), "psnr: shape mismatch " + a.dims_str() + " vs " + b.dims_str());
    check(a.numel() > 0, "psnr: empty input");
    double mse = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    if (mse == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

template <typename T>
double psnr(const FrameT<T>& a, const FrameT<T>& b) {
    return psnr(a.pixels, b.pixels);
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    const double mid = (size - 1) / 2.0;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        w[i] = std::exp(-((i - mid) * (i - mid)) / (2 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable Gaussian filtering of one channel, valid region only.
inline std::vector<double> gauss_valid(const std::vector<double>& img, int h, int w,
                                       const std::vector<double>& win) {
    const int k = static_cast<int>(win.size());
    const int ow = w - k + 1, oh = h - k + 1;
    std::vector<double> horiz(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < k; ++i) s += win[i] * img[static_cast<std::size_t>(y) * w + x + i];
            horiz[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < k; ++i) s += win[i] * horiz[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

struct SsimTerms {
    double ssim = 0;  // full index
    double cs = 0;    // contrast-structure term only (for the multi-scale variant)
};

template <typename T>
SsimTerms ssim_terms(const Tensor<T>& a, const Tensor<T>& b, int win_size, double sigma) {
    const int h = a.dim(0), w = a.dim(1), c = a.dim(2);
    check(h >= win_size && w >= win_size,
          "ssim: image " + a.dims_str() + " smaller than the " + std::to_string(win_size) +
              "-tap window");
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;  // dynamic range 1.0
    const auto win = gaussian_window(win_size, sigma);

    double ssim_sum = 0, cs_sum = 0;
    std::int64_t count = 0;
    std::vector<double> x(static_cast<std::size_t>(h) * w), y(x.size()), xx(x.size()), yy(x.size()),
        xy(x.size());
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                const double av = a.at3(i, j, ch), bv = b.at3(i, j, ch);
                const std::size_t idx = static_cast<std::size_t>(i) * w + j;
                x[idx] = av;
                y[idx] = bv;
                xx[idx] = av * av;
                yy[idx] = bv * bv;
                xy[idx] = av * bv;
            }
        const auto mu1 = gauss_valid(x, h, w, win);
        const auto mu2 = gauss_valid(y, h, w, win);
        const auto sxx = gauss_valid(xx, h, w, win);
        const auto syy = gauss_valid(yy, h, w, win);
        const auto sxy = gauss_valid(xy, h, w, win);
        for (std::size_t i = 0; i < mu1.size(); ++i) {
            const double m1 = mu1[i], m2 = mu2[i];
            const double s1 = sxx[i] - m1 * m1;
            const double s2 = syy[i] - m2 * m2;
            const double s12 = sxy[i] - m1 * m2;
            const double cs = (2 * s12 + C2) / (s1 + s2 + C2);
            ssim_sum += ((2 * m1 * m2 + C1) / (m1 * m1 + m2 * m2 + C1)) * cs;
            cs_sum += cs;
            ++count;
        }
    }
    return {ssim_sum / static_cast<double>(count), cs_sum / static_cast<double>(count)};
}

template <typename T>
Tensor<T> downsample2(const Tensor<T>& t) {
    const int h = t.dim(0) / 2, w = t.dim(1) / 2, c = t.dim(2);
    Tensor<T> out({h, w, c});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch)
                out.at3(y, x, ch) =
                    static_cast<T>((t.at3(2 * y, 2 * x, ch) + t.at3(2 * y, 2 * x + 1, ch) +
                                    t.at3(2 * y + 1, 2 * x, ch) + t.at3(2 * y + 1, 2 * x + 1, ch)) /
                                   T(4));
    return out;
}

}  // namespace detail

// Single-scale structural similarity: 11x11 Gaussian window, sigma 1.5,
// K1=0.01, K2=0.03, dynamic range 1.0, averaged over space and channels
// (valid windows only).
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.same_dims(b), "ssim: shape mismatch");
    return detail::ssim_terms(a, b, 11, 1.5).ssim;
}

template <typename T>
double ssim(const FrameT<T>& a, const FrameT<T>& b) {
    return ssim(a.pixels, b.pixels);
}

// 5-level multi-scale SSIM with the standard weights.
template <typename T>
double ms_ssim(const Tensor<T>& a, const Tensor<T>& b) {
    check(a.same_dims(b), "ms_ssim: shape mismatch");
    static const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    check(std::min(a.dim(0), a.dim(1)) >= 11 * 16,
          "ms_ssim: image too small for 5 scales (needs min dim >= 176)");
    Tensor<T> x = a, y = b;
    double result = 1.0;
    for (int level = 0; level < 5; ++level) {
        const auto terms = detail::ssim_terms(x, y, 11, 1.5);
        if (level < 4) {
            result *= std::pow(std::max(terms.cs, 0.0), weights[level]);
            x = detail::downsample2(x);
            y = detail::downsample2(y);
        } else {
            result *= std::pow(std::max(terms.ssim, 0.0), weights[level]);
        }
    }
    return result;
}

enum class SsimMode { single, multi };

inline const char* to_string(SsimMode m) { return m == SsimMode::single ? "single" : "multi"; }

// --- evaluation protocol -----------------------------------------------

struct EvalRow {
    std::string method;
    int qp = 0;
    double mean_psnr = 0;
    double mean_ssim = 0;
    int clip_count = 0;
    int psnr_inf_count = 0;
    std::string ssim_mode = "single";
    bool external = false;  // supplied from a baseline-rows file, no detail clips
};

struct ClipResult {
    std::string id;
    double psnr = 0;
    double ssim = 0;
    bool psnr_inf = false;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<ClipResult> clips;
    std::vector<std::string> missing;
    std::vector<std::string> warnings;
};

struct EvalOptions {
    std::string method_label = "method";
    int qp = 0;
    SsimMode ssim_mode = SsimMode::single;
    int eval_frame = 2;  // 3rd frame, 1-based protocol
};

// Scores the 3rd frame of each indexed clip against the method outputs in
// `outputs_dir/<clip>/frame_2.png`. Clips without an output are listed as
// missing and excluded from the averages.
inline EvalReport evaluate(const DatasetIndex& index, const std::string& outputs_dir,
                           const EvalOptions& opt) {
    namespace fs = std::filesystem;
    EvalReport report;
    double psnr_sum = 0, ssim_sum = 0;
    int psnr_n = 0, inf_n = 0;
    for (const auto& entry : index.entries) {
        const std::string frame_name = "frame_" + std::to_string(opt.eval_frame) + ".png";
        const fs::path out_path = fs::path(outputs_dir) / entry.id / frame_name;
        if (!fs::exists(out_path)) {
            report.missing.push_back(entry.id);
            continue;
        }
        const Tensor<float> ref = load_png_rgb(entry.original_dir + "/" + frame_name);
        const Tensor<float> got = load_png_rgb(out_path.string());
        ClipResult r;
        r.id = entry.id;
        r.psnr = psnr(ref, got);
        r.psnr_inf = std::isinf(r.psnr);
        r.ssim = opt.ssim_mode == SsimMode::single ? ssim(ref, got) : ms_ssim(ref, got);
        report.clips.push_back(r);
        ssim_sum += r.ssim;
        if (r.psnr_inf) {
            ++inf_n;
        } else {
            psnr_sum += r.psnr;
            ++psnr_n;
        }
    }
    EvalRow row;
    row.method = opt.method_label;
    row.qp = opt.qp;
    row.clip_count = static_cast<int>(report.clips.size());
    row.psnr_inf_count = inf_n;
    row.mean_psnr = psnr_n > 0 ? psnr_sum / psnr_n : 0.0;
    row.mean_ssim = !report.clips.empty() ? ssim_sum / static_cast<double>(report.clips.size()) : 0.0;
    row.ssim_mode = to_string(opt.ssim_mode);
    report.rows.push_back(row);
    return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["schema"] = "vcqe.eval_report/1";
    j["rows"] = nlohmann::json::array();
    for (const auto& r : report.rows)
        j["rows"].push_back({{"method", r.method},
                             {"qp", r.qp},
                             {"psnr", r.mean_psnr},
                             {"ssim", r.mean_ssim},
                             {"clip_count", r.clip_count},
                             {"psnr_inf_count", r.psnr_inf_count},
                             {"ssim_mode", r.ssim_mode},
                             {"external", r.external}});
    j["clips"] = nlohmann::json::array();
    for (const auto& c : report.clips)
        j["clips"].push_back(
            {{"id", c.id}, {"psnr", c.psnr_inf ? 1e9 : c.psnr}, {"ssim", c.ssim}, {"psnr_inf", c.psnr_inf}});
    j["missing"] = report.missing;
    j["warnings"] = report.warnings;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    check(j.value("schema", "") == "vcqe.eval_report/1",
          "eval report: unknown or missing schema version");
    EvalReport report;
    for (const auto& r : j.value("rows", nlohmann::json::array())) {
        EvalRow row;
        row.method = r.value("method", "");
        row.qp = r.value("qp", 0);
        row.mean_psnr = r.value("psnr", 0.0);
        row.mean_ssim = r.value("ssim", 0.0);
        row.clip_count = r.value("clip_count", 0);
        row.psnr_inf_count = r.value("psnr_inf_count", 0);
        row.ssim_mode = r.value("ssim_mode", "single");
        row.external = r.value("external", false);
        report.rows.push_back(row);
    }
    for (const auto& c : j.value("clips", nlohmann::json::array())) {
        ClipResult r;
        r.id = c.value("id", "");
        r.psnr = c.value("psnr", 0.0);
        r.ssim = c.value("ssim", 0.0);
        r.psnr_inf = c.value("psnr_inf", false);
        report.clips.push_back(r);
    }
    for (const auto& m : j.value("missing", nlohmann::json::array()))
        report.missing.push_back(m.get<std::string>());
    return report;
}

// Rows from a baseline file: JSON array of {method, qp, psnr, ssim}.
inline std::vector<EvalRow> baseline_rows_from_json(const nlohmann::json& j) {
    std::vector<EvalRow> rows;
    for (const auto& r : j) {
        EvalRow row;
        row.method = r.at("method");
        row.qp = r.at("qp");
        row.mean_psnr = r.at("psnr");
        row.mean_ssim = r.at("ssim");
        row.external = true;
        rows.push_back(row);
    }
    return rows;
}

// Table-1-shaped markdown grid: one row per QP, one column per method.
inline std::string render_markdown_grid(const std::vector<EvalRow>& rows) {
    std::vector<std::string> methods;
    std::vector<int> qps;
    for (const auto& r : rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
        if (std::find(qps.begin(), qps.end(), r.qp) == qps.end()) qps.push_back(r.qp);
    }
    std::sort(qps.begin(), qps.end());

    std::ostringstream os;
    os << "| QP |";
    for (const auto& m : methods) os << " " << m << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < methods.size(); ++i) os << "---|";
    os << "\n";
    char buf[64];
    for (int qp : qps) {
        os << "| " << qp << " |";
        for (const auto& m : methods) {
            const EvalRow* found = nullptr;
            for (const auto& r : rows)
                if (r.method == m && r.qp == qp) found = &r;
            if (found) {
                std::snprintf(buf, sizeof(buf), " (%.2f, %.3f) |", found->mean_psnr,
                              found->mean_ssim);
                os << buf;
            } else {
                os << " - |";
            }
        }
        os << "\n";
    }
    return os.str();
}

struct MergedComparison {
    std::vector<EvalRow> rows;
    std::vector<std::string> warnings;
    // deltas vs the baseline method, keyed per row index in `rows`
    struct Delta {
        std::string method;
        int qp;
        double dpsnr;
        double dssim;
    };
    std::vector<Delta> deltas;
};

// Merges rows from several reports and computes per-QP deltas against a
// chosen baseline method column. Conflicting clip counts across measured
// rows produce a warning; the minimum count is reported.
inline MergedComparison merge_reports(const std::vector<EvalReport>& reports,
                                      const std::string& baseline_method) {
    MergedComparison out;
    for (const auto& rep : reports)
        for (const auto& row : rep.rows) out.rows.push_back(row);

    int min_count = -1;
    bool conflict = false;
    for (const auto& row : out.rows) {
        if (row.external || row.clip_count <= 0) continue;
        if (min_count < 0) {
            min_count = row.clip_count;
        } else if (row.clip_count != min_count) {
            conflict = true;
            min_count = std::min(min_count, row.clip_count);
        }
    }
    if (conflict)
        out.warnings.push_back("clip counts differ across reports; using minimum " +
                               std::to_string(min_count));

    if (!baseline_method.empty()) {
        for (const auto& row : out.rows) {
            if (row.method == baseline_method) continue;
            for (const auto& base : out.rows) {
                if (base.method != baseline_method || base.qp != row.qp) continue;
                out.deltas.push_back(
                    {row.method, row.qp, row.mean_psnr - base.mean_psnr, row.mean_ssim - base.mean_ssim});
            }
        }
    }
    return out;
}

}  // namespace vcqe
