#pragma once

// Background stacking with temporal Gaussian weights and compositing of the
// live foreground onto the stacked background.

#include <optional>
#include <span>
#include <vector>

#include "turbkit/core.hpp"

namespace turbkit::stackblend {

struct StackedBackground {
    Frame frame;
    double window_sigma = 0.0;
    int window_span = 1;
    int center_index = 0;
};

// Weighted mean over frames center-r..center+r, r = ceil(3 sigma), with
// w_k proportional to exp(-(k - center)^2 / (2 sigma^2)). When masks are given
// (one per frame), a pixel labelled foreground in frame k gets weight 0 for
// that frame. Pixels with no remaining weight take the centre frame's value.
StackedBackground gaussian_stack(const VideoSequence& seq, int center, double sigma,
                                 std::span<const MotionMask> masks = {});

enum class BlendMode { poisson, pyramid };

struct BlendParams {
    BlendMode mode = BlendMode::poisson;
    int dilation = 5;
    double tolerance = 1e-6;  // max-abs residual of the discrete Poisson system
    int max_iterations = 10000;
    double sor_omega = 0.0;   // 0 picks the optimal over-relaxation for the region size
    int pyramid_levels = 5;
    double mask_blur_sigma = 2.0;
};

struct PoissonStats {
    int iterations = 0;
    double residual = 0.0;  // final max-abs residual
    bool converged = false;
    std::vector<double> residual_history;
};

// Solves the Poisson equation on the dilated mask interior: the Laplacian of the
// result matches the foreground's, with the background as Dirichlet boundary.
// Pixels outside the dilated mask are copied from the background.
Frame poisson_blend(const Frame& background, const Frame& foreground, const MotionMask& region,
                    const BlendParams& params, PoissonStats* stats = nullptr);

// Laplacian-pyramid blend under a blurred copy of the dilated mask, applied as
// a correction to the background so far-away pixels stay bit-identical.
Frame pyramid_blend(const Frame& background, const Frame& foreground, const MotionMask& region,
                    const BlendParams& params);

// Empty mask returns the background; a mask covering the whole frame returns
// the foreground.
Frame blend_foreground(const Frame& background, const Frame& foreground, const MotionMask& mask,
                       const BlendParams& params = {}, PoissonStats* stats = nullptr);

}  // namespace turbkit::stackblend
