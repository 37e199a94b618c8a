#include "turbkit/segment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "turbkit/imgproc.hpp"
#include "turbkit/parallel.hpp"

namespace turbkit::segment {

std::vector<int> neighbor_indices(int frame_count, int center, int n) {
    if (n < 1) {
        throw Error(Errc::invalid_argument, "neighbour count must be >= 1");
    }
    if (center < 0 || center >= frame_count) {
        throw Error(Errc::out_of_range, "centre frame " + std::to_string(center) + " out of range");
    }
    const int half = n / 2;
    std::vector<int> out;
    for (int k = 1; k <= half; ++k) {
        if (center - k >= 0) out.push_back(center - k);
        if (center + k < frame_count) out.push_back(center + k);
    }
    if (n % 2 == 1) {
        if (center + half + 1 < frame_count) {
            out.push_back(center + half + 1);
        } else if (center - half - 1 >= 0) {
            out.push_back(center - half - 1);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> feasible_candidates(const std::vector<int>& candidates, int frame_count) {
    std::vector<int> out;
    for (int n : candidates) {
        if (n >= 1 && n <= frame_count - 1) {
            out.push_back(n);
        }
    }
    if (out.empty() && frame_count >= 2) {
        out.push_back(frame_count - 1);
    }
    return out;
}

AOFMap average_optical_flow(const VideoSequence& seq, int center, int n, flow::FlowCache& cache,
                            const flow::FlowEstimator& estimator) {
    const auto neighbours = neighbor_indices(static_cast<int>(seq.size()), center, n);
    if (neighbours.empty()) {
        throw Error(Errc::invalid_argument, "average optical flow needs at least two frames");
    }
    AOFMap map;
    map.width = seq.width();
    map.height = seq.height();
    map.center_index = center;
    map.n_used = static_cast<int>(neighbours.size());

    const std::size_t count = static_cast<std::size_t>(map.width) * map.height;
    std::vector<double> acc(count, 0.0);
    for (int j : neighbours) {
        const auto field = cache.get_or_compute(center, j, seq, estimator);
        for (std::size_t i = 0; i < count; ++i) {
            acc[i] += std::sqrt(static_cast<double>(field->u[i]) * field->u[i] +
                                static_cast<double>(field->v[i]) * field->v[i]);
        }
    }
    map.raw.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        map.raw[i] = static_cast<float>(acc[i] / map.n_used);
    }

    const auto [lo, hi] = std::minmax_element(map.raw.begin(), map.raw.end());
    const float low = *lo;
    const float range = *hi - *lo;
    map.values.assign(count, 0.0f);
    if (range > 0.0f) {
        for (std::size_t i = 0; i < count; ++i) {
            map.values[i] = std::clamp((map.raw[i] - low) / range, 0.0f, 1.0f);
        }
    }
    return map;
}

AOFMap average_optical_flow(const VideoSequence& seq, int center, int n, const flow::FlowParams& params) {
    flow::FlowCache cache;
    const flow::PyramidalFlow estimator(params);
    return average_optical_flow(seq, center, n, cache, estimator);
}

double separation_objective(const AOFMap& map) {
    if (map.values.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (float v : map.values) {
        sum += std::abs(static_cast<double>(v) - 0.5);
    }
    return std::clamp(sum / static_cast<double>(map.values.size()), 0.0, 0.5);
}

int argmax_objective(const std::vector<std::pair<int, double>>& objectives) {
    if (objectives.empty()) {
        throw Error(Errc::invalid_argument, "empty candidate list");
    }
    auto best = objectives.front();
    for (const auto& cand : objectives) {
        if (cand.second > best.second || (cand.second == best.second && cand.first < best.first)) {
            best = cand;
        }
    }
    return best.first;
}

NSelection select_n_opt(const VideoSequence& seq, int center, const std::vector<int>& requested,
                        flow::FlowCache& cache, const flow::FlowEstimator& estimator, unsigned workers) {
    if (requested.empty()) {
        throw Error(Errc::invalid_argument, "empty candidate list");
    }
    const auto candidates = feasible_candidates(requested, static_cast<int>(seq.size()));
    if (candidates.empty()) {
        throw Error(Errc::invalid_argument, "segmentation needs at least two frames");
    }
    std::vector<AOFMap> maps(candidates.size());
    parallel_for(
        0, static_cast<std::ptrdiff_t>(candidates.size()),
        [&](std::ptrdiff_t k) { maps[k] = average_optical_flow(seq, center, candidates[k], cache, estimator); },
        workers);

    NSelection sel;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        sel.objectives.emplace_back(candidates[k], separation_objective(maps[k]));
    }
    sel.n_opt = argmax_objective(sel.objectives);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (candidates[k] == sel.n_opt) {
            sel.map = std::move(maps[k]);
            break;
        }
    }
    return sel;
}

MotionMask threshold_mask(const AOFMap& aof, float threshold, int cleanup_radius) {
    MotionMask mask(aof.width, aof.height);
    mask.threshold = threshold;
    mask.frame_index = aof.center_index;
    for (std::size_t i = 0; i < aof.values.size(); ++i) {
        mask.labels[i] = aof.values[i] > threshold ? 1 : 0;
    }
    if (cleanup_radius > 0) {
        mask = imgproc::close(imgproc::open(mask, cleanup_radius), cleanup_radius);
    }
    mask = imgproc::fill_holes(mask);
    mask.threshold = threshold;
    mask.frame_index = aof.center_index;
    return mask;
}

}  // namespace turbkit::segment
