#include "turbkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "turbkit/imgproc.hpp"
#include "turbkit/parallel.hpp"

namespace turbkit::metrics {

double psnr(const Frame& a, const Frame& b, double peak) {
    if (!a.same_shape(b)) {
        throw Error(Errc::dimension_mismatch, "psnr inputs differ in shape");
    }
    if (a.empty()) {
        throw Error(Errc::invalid_argument, "psnr of empty frames");
    }
    double sum = 0.0;
    auto sa = a.samples();
    auto sb = b.samples();
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const double d = static_cast<double>(sa[i]) - sb[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(sa.size());
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

std::vector<double> ssim_window(int size, double sigma) {
    std::vector<double> k(static_cast<std::size_t>(size));
    const double c = (size - 1) / 2.0;
    double s = 0.0;
    for (int i = 0; i < size; ++i) {
        k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
        s += k[i];
    }
    for (double& v : k) {
        v /= s;
    }
    return k;
}

// Separable weighted sums over every window position that fits: returns an
// (h - n + 1) x (w - n + 1) grid.
std::vector<double> valid_filter(const std::vector<double>& img, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1;
    const int oh = h - n + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
            }
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

}  // namespace

double ssim(const Frame& a, const Frame& b, const SsimParams& params) {
    if (!a.same_shape(b)) {
        throw Error(Errc::dimension_mismatch, "ssim inputs differ in shape");
    }
    if (params.window < 1 || !(params.sigma > 0.0)) {
        throw Error(Errc::invalid_argument, "invalid ssim window");
    }
    if (std::min(a.width(), a.height()) < params.window) {
        throw Error(Errc::invalid_argument, "frame smaller than the ssim window");
    }
    const int w = a.width();
    const int h = a.height();
    const int nc = a.channels();
    const auto k = ssim_window(params.window, params.sigma);
    const double c1 = (params.k1 * params.data_range) * (params.k1 * params.data_range);
    const double c2 = (params.k2 * params.data_range) * (params.k2 * params.data_range);

    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    double total = 0.0;
    for (int c = 0; c < nc; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.samples()[i * nc + c];
            y[i] = b.samples()[i * nc + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = valid_filter(x, w, h, k);
        const auto my = valid_filter(y, w, h, k);
        const auto mxx = valid_filter(xx, w, h, k);
        const auto myy = valid_filter(yy, w, h, k);
        const auto mxy = valid_filter(xy, w, h, k);
        double sum = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = mxx[i] - mx[i] * mx[i];
            const double vy = myy[i] - my[i] * my[i];
            const double cov = mxy[i] - mx[i] * my[i];
            sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                   ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += sum / static_cast<double>(mx.size());
    }
    return total / nc;
}

double mask_iou(const MotionMask& pred, const MotionMask& truth) {
    if (pred.width != truth.width || pred.height != truth.height) {
        throw Error(Errc::dimension_mismatch, "masks differ in size");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] != 0;
        const bool t = truth.labels[i] != 0;
        inter += p && t;
        uni += p || t;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MotionMask canny(const Frame& plane, const CannyParams& params) {
    if (plane.channels() != 1) {
        throw Error(Errc::invalid_argument, "canny expects a single-channel frame");
    }
    const int w = plane.width();
    const int h = plane.height();
    MotionMask edges(w, h);
    const Frame smooth = imgproc::gaussian_blur(plane, params.sigma);
    const auto [gx, gy] = imgproc::sobel(smooth);
    std::vector<double> mag(static_cast<std::size_t>(w) * h);
    double peak = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        mag[i] = std::hypot(static_cast<double>(gx.samples()[i]), static_cast<double>(gy.samples()[i]));
        peak = std::max(peak, mag[i]);
    }
    if (!(peak > 1e-12)) {
        return edges;
    }
    for (double& m : mag) {
        m /= peak;
    }

    // Non-maximum suppression along the gradient direction quantized to 45 degrees.
    std::vector<std::uint8_t> state(mag.size(), 0);  // 1 weak, 2 strong
    const double tan22 = std::tan(std::numbers::pi / 8.0);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double m = mag[i];
            if (m < params.low) {
                continue;
            }
            const double ax = std::abs(static_cast<double>(gx.samples()[i]));
            const double ay = std::abs(static_cast<double>(gy.samples()[i]));
            int ox, oy;
            if (ay <= tan22 * ax) {
                ox = 1, oy = 0;
            } else if (ax <= tan22 * ay) {
                ox = 0, oy = 1;
            } else {
                const bool same = (gx.samples()[i] > 0) == (gy.samples()[i] > 0);
                ox = 1, oy = same ? 1 : -1;
            }
            const double m1 = mag[static_cast<std::size_t>(y + oy) * w + x + ox];
            const double m2 = mag[static_cast<std::size_t>(y - oy) * w + x - ox];
            // Strict on one side so plateaus keep a single ridge pixel.
            if (m > m1 && m >= m2) {
                state[i] = m >= params.high ? 2 : 1;
            }
        }
    }

    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state[i] == 2) {
            edges.labels[i] = 1;
            stack.push_back(i);
        }
    }
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        const int x = static_cast<int>(i % w);
        const int y = static_cast<int>(i / w);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                    continue;
                }
                const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                if (state[j] == 1 && !edges.labels[j]) {
                    edges.labels[j] = 1;
                    stack.push_back(j);
                }
            }
        }
    }
    return edges;
}

double LineSegment::angle_deg() const {
    return std::atan2(static_cast<double>(y1 - y0), static_cast<double>(x1 - x0)) * 180.0 / std::numbers::pi;
}

double LineSegment::length() const { return std::hypot(static_cast<double>(x1 - x0), static_cast<double>(y1 - y0)); }

std::vector<LineSegment> probabilistic_hough(const MotionMask& edges, const HoughParams& params) {
    if (!(params.theta_deg > 0.0) || !(params.rho > 0.0) || params.threshold < 1 || params.min_length < 0 ||
        params.max_gap < 0) {
        throw Error(Errc::invalid_argument, "invalid hough parameters");
    }
    const int w = edges.width;
    const int h = edges.height;
    const double theta = params.theta_deg * std::numbers::pi / 180.0;
    const int numangle = std::max(1, static_cast<int>(std::lround(std::numbers::pi / theta)));
    const int numrho = static_cast<int>(std::lround(((w + h) * 2 + 1) / params.rho));
    const double irho = 1.0 / params.rho;
    std::vector<double> trig(static_cast<std::size_t>(numangle) * 2);
    for (int n = 0; n < numangle; ++n) {
        trig[n * 2] = std::cos(n * theta) * irho;
        trig[n * 2 + 1] = std::sin(n * theta) * irho;
    }
    std::vector<int> acc(static_cast<std::size_t>(numangle) * numrho, 0);
    std::vector<std::uint8_t> mask = edges.labels;

    std::vector<std::pair<int, int>> points;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (mask[static_cast<std::size_t>(y) * w + x]) {
                points.emplace_back(x, y);
            }
        }
    }
    std::mt19937_64 rng(params.seed);
    for (std::size_t i = points.size(); i > 1; --i) {
        std::swap(points[i - 1], points[rng() % i]);
    }

    auto rho_bin = [&](int n, int x, int y) {
        return static_cast<int>(std::lround(x * trig[n * 2] + y * trig[n * 2 + 1])) + (numrho - 1) / 2;
    };

    constexpr int shift = 16;
    std::vector<LineSegment> lines;
    for (const auto& [px, py] : points) {
        if (!mask[static_cast<std::size_t>(py) * w + px]) {
            continue;
        }
        int max_val = params.threshold - 1;
        int max_n = 0;
        for (int n = 0; n < numangle; ++n) {
            const int v = ++acc[static_cast<std::size_t>(n) * numrho + rho_bin(n, px, py)];
            if (max_val < v) {
                max_val = v;
                max_n = n;
            }
        }
        if (max_val < params.threshold) {
            continue;
        }

        // Walk along the line direction in 16.16 fixed point on the minor axis.
        const double a = -trig[max_n * 2 + 1];
        const double b = trig[max_n * 2];
        long x0 = px, y0 = py, dx0, dy0;
        bool xflag;
        if (std::abs(a) > std::abs(b)) {
            xflag = true;
            dx0 = a > 0 ? 1 : -1;
            dy0 = std::lround(b * (1 << shift) / std::abs(a));
            y0 = (y0 << shift) + (1 << (shift - 1));
        } else {
            xflag = false;
            dy0 = b > 0 ? 1 : -1;
            dx0 = std::lround(a * (1 << shift) / std::abs(b));
            x0 = (x0 << shift) + (1 << (shift - 1));
        }
        auto pixel = [&](long x, long y) {
            return xflag ? std::pair<int, int>(static_cast<int>(x), static_cast<int>(y >> shift))
                         : std::pair<int, int>(static_cast<int>(x >> shift), static_cast<int>(y));
        };

        std::pair<int, int> ends[2] = {{px, py}, {px, py}};
        for (int k = 0; k < 2; ++k) {
            long x = x0, y = y0, dx = k ? -dx0 : dx0, dy = k ? -dy0 : dy0;
            int gap = 0;
            for (;; x += dx, y += dy) {
                const auto [j, i] = pixel(x, y);
                if (j < 0 || j >= w || i < 0 || i >= h) {
                    break;
                }
                if (mask[static_cast<std::size_t>(i) * w + j]) {
                    gap = 0;
                    ends[k] = {j, i};
                } else if (++gap > params.max_gap) {
                    break;
                }
            }
        }
        const bool good = std::abs(ends[1].first - ends[0].first) >= params.min_length ||
                          std::abs(ends[1].second - ends[0].second) >= params.min_length;

        for (int k = 0; k < 2; ++k) {
            long x = x0, y = y0, dx = k ? -dx0 : dx0, dy = k ? -dy0 : dy0;
            for (;; x += dx, y += dy) {
                const auto [j, i] = pixel(x, y);
                if (j < 0 || j >= w || i < 0 || i >= h) {
                    break;
                }
                const std::size_t q = static_cast<std::size_t>(i) * w + j;
                if (mask[q]) {
                    if (good) {
                        for (int n = 0; n < numangle; ++n) {
                            --acc[static_cast<std::size_t>(n) * numrho + rho_bin(n, j, i)];
                        }
                    }
                    mask[q] = 0;
                }
                if (j == ends[k].first && i == ends[k].second) {
                    break;
                }
            }
        }
        if (good) {
            lines.push_back({ends[0].first, ends[0].second, ends[1].first, ends[1].second});
        }
    }
    return lines;
}

double axis_deviation(double angle_deg) {
    const double d = std::fmod(std::abs(angle_deg), 90.0);
    return std::min(d, 90.0 - d);
}

LineDeviationEntry line_deviation(const Frame& frame, const LineDeviationParams& params) {
    const Frame plane = to_luma(frame);
    const MotionMask edges = canny(plane, params.canny);
    const auto segments = probabilistic_hough(edges, params.hough);
    LineDeviationEntry e;
    e.detected = static_cast<int>(segments.size());
    double sum = 0.0;
    for (const LineSegment& s : segments) {
        const double d = axis_deviation(s.angle_deg());
        if (d > params.oblique_cutoff) {
            continue;
        }
        sum += d;
        ++e.line_count;
    }
    if (e.line_count > 0) {
        e.defined = true;
        e.score = sum / e.line_count;
    }
    return e;
}

RollingStats rolling_stats(std::span<const double> values, int window) {
    if (window < 1) {
        throw Error(Errc::invalid_argument, "rolling window must be at least 1");
    }
    RollingStats r;
    if (values.empty()) {
        return r;
    }
    const std::size_t n = std::min(values.size(), static_cast<std::size_t>(window));
    for (std::size_t end = n; end <= values.size(); ++end) {
        double mean = 0.0;
        for (std::size_t i = end - n; i < end; ++i) {
            mean += values[i];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = end - n; i < end; ++i) {
            var += (values[i] - mean) * (values[i] - mean);
        }
        r.mean.push_back(mean);
        r.std.push_back(std::sqrt(var / static_cast<double>(n)));
    }
    return r;
}

LineDeviationReport rolling_line_deviation(const VideoSequence& seq, int window, const LineDeviationParams& params,
                                           unsigned workers) {
    if (window < 1) {
        throw Error(Errc::invalid_argument, "rolling window must be at least 1");
    }
    LineDeviationReport report;
    report.window = window;
    report.params = params;
    report.per_frame.resize(seq.size());
    parallel_for(
        0, static_cast<std::ptrdiff_t>(seq.size()),
        [&](std::ptrdiff_t i) { report.per_frame[i] = line_deviation(seq[i], params); }, workers);
    std::vector<double> scores;
    for (const auto& e : report.per_frame) {
        if (e.defined) {
            scores.push_back(e.score);
        }
    }
    if (scores.empty()) {
        throw Error(Errc::invalid_argument, "no frame produced a defined line deviation");
    }
    report.rolling = rolling_stats(scores, window);
    const RollingStats all = rolling_stats(scores, static_cast<int>(scores.size()));
    report.mean = all.mean.front();
    report.std = all.std.front();
    return report;
}

namespace {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

std::string EvaluationReport::to_csv() const {
    std::ostringstream out;
    out << "frame";
    auto has = [&](const char* m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
    if (has("psnr")) out << ",psnr";
    if (has("ssim")) out << ",ssim";
    if (has("iou")) out << ",iou";
    if (has("linedev")) out << ",linedev,line_count";
    out << "\n";
    for (const FrameScores& f : frames) {
        out << f.frame;
        if (has("psnr")) out << "," << (f.psnr ? (std::isinf(*f.psnr) ? std::string("inf") : format_number(*f.psnr)) : "");
        if (has("ssim")) out << "," << (f.ssim ? format_number(*f.ssim) : "");
        if (has("iou")) out << "," << (f.iou ? format_number(*f.iou) : "");
        if (has("linedev")) {
            const bool def = f.linedev && f.linedev->defined;
            out << "," << (def ? format_number(f.linedev->score) : "") << "," << (f.linedev ? f.linedev->line_count : 0);
        }
        out << "\n";
    }
    return out.str();
}

std::string EvaluationReport::to_json() const {
    nlohmann::ordered_json j;
    j["metrics"] = metrics;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const FrameScores& f : frames) {
        nlohmann::ordered_json r;
        r["frame"] = f.frame;
        if (f.psnr) {
            if (std::isinf(*f.psnr)) {
                r["psnr"] = nullptr;
                r["psnr_infinite"] = true;
            } else {
                r["psnr"] = *f.psnr;
                r["psnr_infinite"] = false;
            }
        }
        if (f.ssim) r["ssim"] = *f.ssim;
        if (f.iou) r["iou"] = *f.iou;
        if (f.linedev) {
            r["linedev"] = f.linedev->defined ? nlohmann::ordered_json(f.linedev->score) : nlohmann::ordered_json();
            r["line_count"] = f.linedev->line_count;
        }
        rows.push_back(std::move(r));
    }
    j["frames"] = std::move(rows);

    nlohmann::ordered_json summary;
    auto mean_of = [&](auto getter) -> nlohmann::ordered_json {
        double s = 0.0;
        int n = 0;
        for (const FrameScores& f : frames) {
            if (auto v = getter(f); v && std::isfinite(*v)) {
                s += *v;
                ++n;
            }
        }
        return n ? nlohmann::ordered_json(s / n) : nlohmann::ordered_json();
    };
    auto has = [&](const char* m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
    if (has("psnr")) summary["psnr_mean_finite"] = mean_of([](const FrameScores& f) { return f.psnr; });
    if (has("ssim")) summary["ssim_mean"] = mean_of([](const FrameScores& f) { return f.ssim; });
    if (has("iou")) summary["iou_mean"] = mean_of([](const FrameScores& f) { return f.iou; });
    if (linedev) {
        nlohmann::ordered_json ld;
        ld["mean"] = linedev->mean;
        ld["std"] = linedev->std;
        ld["window"] = linedev->window;
        ld["rolling_mean"] = linedev->rolling.mean;
        ld["rolling_std"] = linedev->rolling.std;
        const auto& p = linedev->params;
        ld["params"] = {{"canny_sigma", p.canny.sigma},     {"canny_low", p.canny.low},
                        {"canny_high", p.canny.high},       {"hough_theta_deg", p.hough.theta_deg},
                        {"hough_threshold", p.hough.threshold}, {"min_length", p.hough.min_length},
                        {"max_gap", p.hough.max_gap},       {"oblique_cutoff", p.oblique_cutoff}};
        summary["linedev"] = std::move(ld);
    }
    j["summary"] = std::move(summary);
    return j.dump(2);
}

EvaluationReport evaluate(const std::vector<std::string>& metrics, const EvaluationInputs& in) {
    EvaluationReport report;
    report.metrics = metrics;
    bool want_psnr = false, want_ssim = false, want_iou = false, want_linedev = false;
    for (const std::string& m : metrics) {
        if (m == "psnr") want_psnr = true;
        else if (m == "ssim") want_ssim = true;
        else if (m == "iou") want_iou = true;
        else if (m == "linedev") want_linedev = true;
        else throw Error(Errc::invalid_argument, "unknown metric: " + m);
    }
    std::size_t n = 0;
    if (want_psnr || want_ssim || want_linedev) {
        if (!in.restored || in.restored->empty()) {
            throw Error(Errc::empty_sequence, "no frames to evaluate");
        }
        n = in.restored->size();
    }
    if (want_psnr || want_ssim) {
        if (!in.reference || in.reference->size() != n) {
            throw Error(Errc::length_mismatch, "reference sequence length differs");
        }
    }
    if (want_iou) {
        if (in.predicted_masks.size() != in.truth_masks.size() || in.truth_masks.empty()) {
            throw Error(Errc::length_mismatch, "mask counts differ or are empty");
        }
        if (n != 0 && in.truth_masks.size() != n) {
            throw Error(Errc::length_mismatch, "mask count differs from frame count");
        }
        n = in.truth_masks.size();
    }
    report.frames.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        report.frames[i].frame = static_cast<int>(i);
    }
    parallel_for(
        0, static_cast<std::ptrdiff_t>(n),
        [&](std::ptrdiff_t i) {
            FrameScores& f = report.frames[i];
            if (want_psnr) f.psnr = psnr((*in.restored)[i], (*in.reference)[i]);
            if (want_ssim) f.ssim = ssim((*in.restored)[i], (*in.reference)[i]);
            if (want_iou) f.iou = mask_iou(in.predicted_masks[i], in.truth_masks[i]);
        },
        in.workers);
    if (want_linedev) {
        report.linedev = rolling_line_deviation(*in.restored, in.rolling_window, in.linedev, in.workers);
        for (std::size_t i = 0; i < n; ++i) {
            report.frames[i].linedev = report.linedev->per_frame[i];
        }
    }
    return report;
}

}  // namespace turbkit::metrics
