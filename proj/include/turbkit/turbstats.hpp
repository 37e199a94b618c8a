#pragma once

// Turbulence strength (Cn^2) from image statistics and the temporal Gaussian
// window derived from it.
//
//   Cn^2 = PFOV^2 * D^(1/3) / (L * P) * sigma(V)^2 / Grad(V)
//
// sigma(V)^2 is the per-pixel temporal variance averaged over pixels, Grad(V)
// the mean central-difference gradient magnitude of the temporal-mean frame.
// Without optics the bare ratio is reported as a proxy.

#include <optional>
#include <string>

#include "turbkit/core.hpp"

namespace turbkit::turbstats {

struct OpticalConfig {
    double pfov = 0.0;          // radians per pixel
    double aperture_d = 0.0;    // metres
    double distance_l = 0.0;    // metres
    double turbulence_p = 0.0;  // dimensionless

    double factor() const;  // PFOV^2 D^(1/3) / (L P); throws unless all positive
};

struct TurbulenceReport {
    double cn2 = 0.0;
    double variance_term = 0.0;
    double gradient_term = 0.0;
    double window_sigma = 1.0;
    int window_span = 7;
};

struct WindowCalibration {
    double cn2_low = 1e-4;
    double cn2_high = 3.3e-2;
    double sigma_min = 1.0;
    double sigma_max = 20.0;
};

// `background` selects the pixels that enter both statistics (true = use);
// without it every pixel is used.
TurbulenceReport estimate_cn2(const VideoSequence& seq, const std::optional<OpticalConfig>& optics = std::nullopt,
                              const MotionMask* background = nullptr);

// sigma is log-linear in cn2 between the calibration points and clamped
// outside them; span = 2 ceil(3 sigma) + 1.
struct Window {
    double sigma = 0.0;
    int span = 1;
};
Window window_from_cn2(double cn2, const WindowCalibration& calibration);
TurbulenceReport with_window(TurbulenceReport report, const WindowCalibration& calibration);

int window_span(double sigma);

std::string to_json(const TurbulenceReport& report);

}  // namespace turbkit::turbstats
