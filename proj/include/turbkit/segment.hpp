#pragma once

// Unsupervised motion segmentation from average optical flow (AOF).
//
// AOF at a centre frame is the per-pixel mean of flow magnitudes from the
// centre to each of N neighbouring frames, min-max normalized per map. The
// neighbour count is picked from a candidate list by maximizing the mean
// distance of the normalized map from 0.5, and the chosen map is thresholded
// into a foreground mask.

#include <utility>
#include <vector>

#include "turbkit/core.hpp"
#include "turbkit/flow.hpp"
#include "turbkit/flowcache.hpp"

namespace turbkit::segment {

struct AOFMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;  // normalized to [0, 1]
    std::vector<float> raw;     // mean magnitude in pixels, before normalization
    int n_used = 0;
    int center_index = 0;
};

struct SegmentParams {
    float threshold = 0.5f;
    std::vector<int> candidates{2, 4, 8, 16, 32};
    int morphology_radius = 3;
};

// Neighbour window: floor(n/2) frames each side of the centre, clipped at the
// sequence ends. For odd n the remaining frame is taken after the centre, or
// before it when the centre is the last frame.
std::vector<int> neighbor_indices(int frame_count, int center, int n);

// Candidates that fit the sequence (n <= frame_count - 1), or {frame_count - 1}
// when none does.
std::vector<int> feasible_candidates(const std::vector<int>& candidates, int frame_count);

AOFMap average_optical_flow(const VideoSequence& seq, int center, int n, flow::FlowCache& cache,
                            const flow::FlowEstimator& estimator);
AOFMap average_optical_flow(const VideoSequence& seq, int center, int n, const flow::FlowParams& params = {});

// (1/M) sum |AOF_i - 0.5| over the normalized map; always within [0, 0.5].
double separation_objective(const AOFMap& map);

struct NSelection {
    int n_opt = 0;
    std::vector<std::pair<int, double>> objectives;  // (candidate, objective) in candidate order
    AOFMap map;                                       // AOF at n_opt
};

// Candidates are first reduced with feasible_candidates. Exact objective ties
// go to the smaller N.
NSelection select_n_opt(const VideoSequence& seq, int center, const std::vector<int>& candidates,
                        flow::FlowCache& cache, const flow::FlowEstimator& estimator, unsigned workers = 0);

// Argmax over precomputed objectives with the same tie rule.
int argmax_objective(const std::vector<std::pair<int, double>>& objectives);

// labels = values > threshold, then open, close and hole filling.
MotionMask threshold_mask(const AOFMap& aof, float threshold, int cleanup_radius);

}  // namespace turbkit::segment
