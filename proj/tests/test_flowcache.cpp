#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "test_util.hpp"
#include "turbkit/flowcache.hpp"
#include "turbkit/imgproc.hpp"

using namespace turbkit;

namespace {

// Counts computations; optionally slow so concurrent callers overlap.
class CountingFlow final : public flow::FlowEstimator {
public:
    explicit CountingFlow(int delay_ms = 0) : delay_ms_(delay_ms) {}
    flow::FlowField compute(const Frame& a, const Frame& b) const override {
        ++calls;
        if (delay_ms_) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
        flow::FlowField f(a.width(), a.height());
        f.u.assign(f.u.size(), static_cast<float>(b.index() - a.index()));
        f.source_index = a.index();
        f.target_index = b.index();
        return f;
    }
    std::string digest() const override { return "counting"; }
    mutable std::atomic<int> calls{0};

private:
    int delay_ms_;
};

VideoSequence small_seq(int n) {
    std::vector<Frame> frames;
    for (int i = 0; i < n; ++i) frames.push_back(tk_test::random_frame(8, 8, 1, i));
    return VideoSequence(frames);
}

}  // namespace

TEST(FlowCache, HitOnSecondRequest) {
    const auto seq = small_seq(3);
    CountingFlow est;
    flow::FlowCache cache(4);
    auto a = cache.get_or_compute(0, 1, seq, est);
    auto b = cache.get_or_compute(0, 1, seq, est);
    EXPECT_EQ(a.get(), b.get());
    EXPECT_EQ(cache.hits(), 1u);
    EXPECT_EQ(cache.misses(), 1u);
    EXPECT_EQ(est.calls, 1);
}

TEST(FlowCache, DifferentParamsHashMisses) {
    const auto seq = small_seq(3);
    CountingFlow est;
    flow::FlowCache cache(4);
    cache.get_or_compute(flow::FlowKey{0, 1, 1}, seq, est);
    cache.get_or_compute(flow::FlowKey{0, 1, 2}, seq, est);
    EXPECT_EQ(cache.misses(), 2u);
    EXPECT_EQ(est.calls, 2);
}

TEST(FlowCache, LruEviction) {
    const auto seq = small_seq(4);
    CountingFlow est;
    flow::FlowCache cache(2);
    cache.get_or_compute(0, 1, seq, est);
    cache.get_or_compute(0, 2, seq, est);
    cache.get_or_compute(0, 3, seq, est);
    EXPECT_EQ(cache.size(), 2u);
    cache.get_or_compute(0, 1, seq, est);
    EXPECT_EQ(cache.misses(), 4u);
    EXPECT_EQ(cache.hits(), 0u);
    EXPECT_EQ(est.calls, 4);
}

TEST(FlowCache, IndexOutOfRange) {
    const auto seq = small_seq(2);
    CountingFlow est;
    flow::FlowCache cache;
    EXPECT_THROW(cache.get_or_compute(0, 2, seq, est), Error);
    EXPECT_THROW(cache.get_or_compute(-1, 0, seq, est), Error);
}

TEST(FlowCache, SingleFlightAndExactCounters) {
    const auto seq = small_seq(3);
    CountingFlow est(30);
    flow::FlowCache cache(8);
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
        threads.emplace_back([&] { cache.get_or_compute(0, 2, seq, est); });
    }
    threads.clear();
    EXPECT_EQ(est.calls, 1);
    EXPECT_EQ(cache.hits() + cache.misses(), 8u);
    EXPECT_EQ(cache.misses(), 1u);
}

TEST(FlowCache, TransparentForRealEstimator) {
    std::vector<Frame> frames;
    const Frame a = imgproc::gaussian_blur(tk_test::random_frame(32, 32, 1, 5), 1.5);
    frames.push_back(a);
    frames.push_back(imgproc::shift_replicate(a, 1, 0));
    const VideoSequence seq(frames);
    const flow::PyramidalFlow est;
    flow::FlowCache cache;
    const auto cached = cache.get_or_compute(0, 1, seq, est);
    const auto direct = est.compute(seq[0], seq[1]);
    EXPECT_EQ(cached->u, direct.u);
    EXPECT_EQ(cached->v, direct.v);
}
