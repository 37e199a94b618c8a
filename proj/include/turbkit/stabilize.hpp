#pragma once

// Global translational stabilization by cross-correlation against the first
// frame.
//
// Every frame has the sequence mean subtracted, is cropped by `crop_border`
// pixels on each side and is correlated (no kernel flip) against the full
// reference frame. The correlation surface is indexed by the candidate
// displacement d in [-border, border]^2 with d = (0, 0) at its centre, so the
// reported offset is argmax(surface) - centre. An offset (dx, dy) means the
// frame's content sits at +(dx, dy) relative to the reference.

#include <cstdint>
#include <span>
#include <vector>

#include "turbkit/core.hpp"

namespace turbkit::stabilize {

struct Offset {
    int dx = 0;
    int dy = 0;
    friend bool operator==(const Offset&, const Offset&) = default;
};

struct StabilizationResult {
    std::vector<Offset> offsets;
    int reference_index = 0;
    int crop_border = 50;
    VideoSequence stabilized;
};

inline constexpr int default_crop_border = 50;

// Correlation surface of side 2*border+1, row-major, index (dy+border, dx+border).
struct CorrelationSurface {
    int border = 0;
    std::vector<double> values;

    int side() const noexcept { return 2 * border + 1; }
    double at(int dx, int dy) const { return values[static_cast<std::size_t>(dy + border) * side() + dx + border]; }
};

// FFT route. `reference` and `frame` are mean-subtracted single-channel planes
// of identical size.
CorrelationSurface correlation_surface(const Frame& reference, const Frame& frame, int border);

// Location of the maximum; exact ties go to the smallest (|dy|, |dx|), then (dy, dx).
Offset surface_peak(const CorrelationSurface& surface);

// Frames may be RGB; they are converted to luma internally.
std::vector<Offset> estimate_offsets(const VideoSequence& seq, int crop_border = default_crop_border,
                                     unsigned workers = 0);

// Translates each frame by -(dx, dy); exposed borders replicate the edge.
VideoSequence apply_offsets(const VideoSequence& seq, std::span<const Offset> offsets);

StabilizationResult stabilize(const VideoSequence& seq, int crop_border = default_crop_border,
                              unsigned workers = 0);

}  // namespace turbkit::stabilize
