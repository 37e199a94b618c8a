#pragma once

// Low-level raster operations used across modules. All filters replicate the
// edge pixel for out-of-range taps.

#include <utility>
#include <vector>

#include "turbkit/core.hpp"

namespace turbkit::imgproc {

// Normalized Gaussian taps with radius ceil(3 sigma). sigma <= 0 gives {1}.
std::vector<float> gaussian_kernel(double sigma);

Frame convolve_separable(const Frame& src, const std::vector<float>& kx, const std::vector<float>& ky);
Frame gaussian_blur(const Frame& src, double sigma);

// Bilinear sample of channel c at continuous pixel coordinates, edge clamped.
inline float sample_bilinear(const Frame& f, float x, float y, int c = 0) {
    const float maxx = static_cast<float>(f.width() - 1);
    const float maxy = static_cast<float>(f.height() - 1);
    x = x < 0.0f ? 0.0f : (x > maxx ? maxx : x);
    y = y < 0.0f ? 0.0f : (y > maxy ? maxy : y);
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const float fx = x - static_cast<float>(x0);
    const float fy = y - static_cast<float>(y0);
    const int x1 = x0 + (fx > 0.0f ? 1 : 0);
    const int y1 = y0 + (fy > 0.0f ? 1 : 0);
    const float top = f.at(x0, y0, c) + fx * (f.at(x1, y0, c) - f.at(x0, y0, c));
    const float bottom = f.at(x0, y1, c) + fx * (f.at(x1, y1, c) - f.at(x0, y1, c));
    return top + fy * (bottom - top);
}

// Resamples to (width, height) with pixel-centre alignment.
Frame resize_bilinear(const Frame& src, int width, int height);

// Gaussian-prefiltered downscale by `scale` in (0, 1].
Frame downscale(const Frame& src, double scale);

// Central differences in the interior, one-sided differences on the border.
std::pair<Frame, Frame> gradient_central(const Frame& plane);

// 3x3 Sobel responses of a single-channel frame.
std::pair<Frame, Frame> sobel(const Frame& plane);

// Burt-Adelson 5-tap reduce / expand.
Frame pyr_down(const Frame& src);
Frame pyr_up(const Frame& src, int width, int height);

// out(x, y) = src(x + dx, y + dy), edge replicated.
Frame shift_replicate(const Frame& src, int dx, int dy);

// Binary morphology with a disk of the given radius. Pixels outside the image
// count as background for dilation and as foreground for erosion.
MotionMask dilate(const MotionMask& mask, int radius);
MotionMask erode(const MotionMask& mask, int radius);
MotionMask open(const MotionMask& mask, int radius);
MotionMask close(const MotionMask& mask, int radius);
// Background regions not connected (4-neighbourhood) to the border become foreground.
MotionMask fill_holes(const MotionMask& mask);

double mean_gradient_magnitude(const Frame& plane);

}  // namespace turbkit::imgproc
