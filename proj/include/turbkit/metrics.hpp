#pragma once

// Image-quality and geometry metrics: PSNR, SSIM, mask IoU and the line
// deviation score (Canny edges, probabilistic Hough segments, angular distance
// from the nearest image axis).

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "turbkit/core.hpp"

namespace turbkit::metrics {

// +inf when the frames are identical.
double psnr(const Frame& a, const Frame& b, double peak = 1.0);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

// Mean local SSIM over window positions that fit inside the frame, averaged
// over channels.
double ssim(const Frame& a, const Frame& b, const SsimParams& params = {});

// 1.0 when both masks are empty.
double mask_iou(const MotionMask& pred, const MotionMask& truth);

struct CannyParams {
    double sigma = 1.4;
    double low = 0.1;   // fractions of the largest gradient magnitude
    double high = 0.3;
};

// Edge map of a single-channel frame (true = edge).
MotionMask canny(const Frame& plane, const CannyParams& params = {});

struct LineSegment {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double angle_deg() const;  // in (-180, 180]
    double length() const;
};

struct HoughParams {
    double theta_deg = 1.0;
    double rho = 1.0;
    int threshold = 50;
    int min_length = 30;
    int max_gap = 10;
    std::uint64_t seed = 0;
};

// Progressive probabilistic Hough transform over the edge pixels, visited in a
// seeded random order.
std::vector<LineSegment> probabilistic_hough(const MotionMask& edges, const HoughParams& params = {});

// Distance in degrees from the nearest of 0, 90 and 180 degrees.
double axis_deviation(double angle_deg);

struct LineDeviationParams {
    CannyParams canny;
    HoughParams hough;
    double oblique_cutoff = 20.0;
};

struct LineDeviationEntry {
    bool defined = false;
    double score = 0.0;  // mean deviation in degrees over kept segments
    int line_count = 0;  // kept segments
    int detected = 0;    // segments before the oblique cutoff
};

LineDeviationEntry line_deviation(const Frame& frame, const LineDeviationParams& params = {});

struct RollingStats {
    std::vector<double> mean;  // one value per full trailing window
    std::vector<double> std;   // population standard deviation
};

// Trailing windows over `values`; with fewer values than `window` a single
// window over all of them is reported.
RollingStats rolling_stats(std::span<const double> values, int window);

struct LineDeviationReport {
    std::vector<LineDeviationEntry> per_frame;
    RollingStats rolling;
    double mean = 0.0;  // over defined frames
    double std = 0.0;
    int window = 10;
    LineDeviationParams params;
};

// Throws when no frame has a defined score.
LineDeviationReport rolling_line_deviation(const VideoSequence& seq, int window = 10,
                                           const LineDeviationParams& params = {}, unsigned workers = 0);

// ---- sequence evaluation report ----

struct FrameScores {
    int frame = 0;
    std::optional<double> psnr;  // +inf kept as is
    std::optional<double> ssim;
    std::optional<double> iou;
    std::optional<LineDeviationEntry> linedev;
};

struct EvaluationReport {
    std::vector<std::string> metrics;
    std::vector<FrameScores> frames;
    std::optional<LineDeviationReport> linedev;

    std::string to_csv() const;
    std::string to_json() const;
};

struct EvaluationInputs {
    const VideoSequence* restored = nullptr;
    const VideoSequence* reference = nullptr;       // psnr, ssim
    std::span<const MotionMask> predicted_masks;    // iou
    std::span<const MotionMask> truth_masks;
    int rolling_window = 10;
    LineDeviationParams linedev;
    unsigned workers = 0;
};

// `metrics` is any subset of {"psnr", "ssim", "iou", "linedev"}.
EvaluationReport evaluate(const std::vector<std::string>& metrics, const EvaluationInputs& inputs);

}  // namespace turbkit::metrics
