#include "turbkit/flowcache.hpp"

#include <string>

namespace turbkit::flow {

std::uint64_t digest_hash(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::size_t FlowCache::KeyHash::operator()(const FlowKey& k) const noexcept {
    std::uint64_t h = k.params_hash;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.source_index)) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.target_index)) * 0xC2B2AE3D27D4EB4Full;
    return static_cast<std::size_t>(h ^ (h >> 29));
}

FlowCache::FlowCache(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

std::size_t FlowCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void FlowCache::touch(Entry& e) { lru_.splice(lru_.begin(), lru_, e.lru); }

void FlowCache::evict_locked() {
    while (entries_.size() > capacity_) {
        const FlowKey victim = lru_.back();
        lru_.pop_back();
        entries_.erase(victim);
    }
}

std::shared_ptr<const FlowField> FlowCache::get_or_compute(int source, int target, const VideoSequence& seq,
                                                           const FlowEstimator& estimator) {
    return get_or_compute(FlowKey{source, target, digest_hash(estimator.digest())}, seq, estimator);
}

std::shared_ptr<const FlowField> FlowCache::get_or_compute(const FlowKey& key, const VideoSequence& seq,
                                                           const FlowEstimator& estimator) {
    const auto n = static_cast<int>(seq.size());
    if (key.source_index < 0 || key.source_index >= n || key.target_index < 0 || key.target_index >= n) {
        throw Error(Errc::out_of_range, "flow key index out of range (" + std::to_string(key.source_index) + ", " +
                                            std::to_string(key.target_index) + ")");
    }

    std::promise<std::shared_ptr<const FlowField>> promise;
    {
        std::unique_lock lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            ++hits_;
            touch(it->second);
            Value value = it->second.value;
            lock.unlock();
            return value.get();
        }
        ++misses_;
        lru_.push_front(key);
        entries_.emplace(key, Entry{promise.get_future().share(), lru_.begin()});
        evict_locked();
    }

    try {
        auto field = std::make_shared<const FlowField>(estimator.compute(seq[key.source_index], seq[key.target_index]));
        promise.set_value(field);
        return field;
    } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        if (auto it = entries_.find(key); it != entries_.end()) {
            lru_.erase(it->second.lru);
            entries_.erase(it);
        }
        throw;
    }
}

}  // namespace turbkit::flow
