#include "turbkit/turbstats.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "turbkit/imgproc.hpp"

namespace turbkit::turbstats {

double OpticalConfig::factor() const {
    if (!(pfov > 0.0 && aperture_d > 0.0 && distance_l > 0.0 && turbulence_p > 0.0)) {
        throw Error(Errc::invalid_argument, "optical parameters must be strictly positive");
    }
    return pfov * pfov * std::cbrt(aperture_d) / (distance_l * turbulence_p);
}

TurbulenceReport estimate_cn2(const VideoSequence& seq, const std::optional<OpticalConfig>& optics,
                              const MotionMask* background) {
    if (seq.size() < 2) {
        throw Error(Errc::invalid_argument, "Cn2 estimation needs at least two frames");
    }
    const VideoSequence luma = to_luma(seq);
    const int w = luma.width();
    const int h = luma.height();
    const std::size_t n = luma[0].pixel_count();
    if (background && (background->width != w || background->height != h)) {
        throw Error(Errc::dimension_mismatch, "background mask does not match frames");
    }

    std::vector<double> mean(n, 0.0), m2(n, 0.0);
    // Welford per pixel; order-free up to rounding.
    double count = 0.0;
    for (const Frame& f : luma) {
        count += 1.0;
        auto s = f.samples();
        for (std::size_t i = 0; i < n; ++i) {
            const double x = s[i];
            const double d = x - mean[i];
            mean[i] += d / count;
            m2[i] += d * (x - mean[i]);
        }
    }

    Frame mean_frame(w, h, 1);
    for (std::size_t i = 0; i < n; ++i) {
        mean_frame.samples()[i] = static_cast<float>(mean[i]);
    }
    const auto [gx, gy] = imgproc::gradient_central(mean_frame);

    double var_sum = 0.0;
    double grad_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (background && !background->labels[i]) {
            continue;
        }
        var_sum += std::max(0.0, m2[i] / count);
        grad_sum += std::hypot(static_cast<double>(gx.samples()[i]), static_cast<double>(gy.samples()[i]));
        ++used;
    }
    if (used == 0) {
        throw Error(Errc::invalid_argument, "no background pixels for Cn2 estimation");
    }

    TurbulenceReport report;
    report.variance_term = var_sum / static_cast<double>(used);
    report.gradient_term = grad_sum / static_cast<double>(used);
    if (!(report.gradient_term > 0.0)) {
        throw Error(Errc::degenerate_gradient, "degenerate gradient: temporal-mean frame is constant");
    }
    const double factor = optics ? optics->factor() : 1.0;
    report.cn2 = factor * report.variance_term / report.gradient_term;
    return report;
}

int window_span(double sigma) { return 2 * static_cast<int>(std::ceil(3.0 * std::max(sigma, 0.0))) + 1; }

Window window_from_cn2(double cn2, const WindowCalibration& cal) {
    if (!(cal.cn2_low > 0.0) || !(cal.cn2_high > cal.cn2_low) || cal.sigma_max < cal.sigma_min) {
        throw Error(Errc::invalid_argument, "window calibration bounds must be ordered and positive");
    }
    double t = 0.0;
    if (cn2 > cal.cn2_low) {
        t = (std::log(cn2) - std::log(cal.cn2_low)) / (std::log(cal.cn2_high) - std::log(cal.cn2_low));
    }
    t = std::clamp(t, 0.0, 1.0);
    Window win;
    win.sigma = cal.sigma_min + t * (cal.sigma_max - cal.sigma_min);
    win.span = window_span(win.sigma);
    return win;
}

TurbulenceReport with_window(TurbulenceReport report, const WindowCalibration& calibration) {
    const Window win = window_from_cn2(report.cn2, calibration);
    report.window_sigma = win.sigma;
    report.window_span = win.span;
    return report;
}

std::string to_json(const TurbulenceReport& r) {
    nlohmann::ordered_json j;
    j["cn2"] = r.cn2;
    j["variance_term"] = r.variance_term;
    j["gradient_term"] = r.gradient_term;
    j["window_sigma"] = r.window_sigma;
    j["window_span"] = r.window_span;
    return j.dump(2);
}

}  // namespace turbkit::turbstats
