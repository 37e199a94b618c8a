#pragma once

// Shared LRU store of computed flow fields keyed by (source, target, params).
// Concurrent requests for a key that is still being computed wait for the
// single in-flight computation instead of duplicating it.

#include <atomic>
#include <cstdint>
#include <future>
#include <list>
#include <memory>
#include <mutex>
#include <string_view>
#include <unordered_map>

#include "turbkit/flow.hpp"

namespace turbkit::flow {

struct FlowKey {
    int source_index = 0;
    int target_index = 0;
    std::uint64_t params_hash = 0;
    friend bool operator==(const FlowKey&, const FlowKey&) = default;
};

// FNV-1a, stable across platforms.
std::uint64_t digest_hash(std::string_view text);

class FlowCache {
public:
    static constexpr std::size_t default_capacity = 64;

    explicit FlowCache(std::size_t capacity = default_capacity);

    std::shared_ptr<const FlowField> get_or_compute(const FlowKey& key, const VideoSequence& seq,
                                                    const FlowEstimator& estimator);
    std::shared_ptr<const FlowField> get_or_compute(int source, int target, const VideoSequence& seq,
                                                    const FlowEstimator& estimator);

    std::uint64_t hits() const noexcept { return hits_.load(); }
    std::uint64_t misses() const noexcept { return misses_.load(); }
    std::size_t size() const;
    std::size_t capacity() const noexcept { return capacity_; }

private:
    struct KeyHash {
        std::size_t operator()(const FlowKey& k) const noexcept;
    };
    using Value = std::shared_future<std::shared_ptr<const FlowField>>;
    struct Entry {
        Value value;
        std::list<FlowKey>::iterator lru;
    };

    void touch(Entry& e);
    void evict_locked();

    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::unordered_map<FlowKey, Entry, KeyHash> entries_;
    std::list<FlowKey> lru_;  // front = most recent
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace turbkit::flow
