#include "pulsegrid/buffer_pool.hpp"

#include <algorithm>
#include <bit>
#include <mutex>
#include <new>

namespace pulsegrid {

namespace {
constexpr std::size_t min_block = 256;
constexpr std::align_val_t block_alignment{64};

std::byte* allocate_bytes(std::size_t n) {
    return static_cast<std::byte*>(::operator new(n, block_alignment));
}
void free_bytes(std::byte* p) {
    ::operator delete(p, block_alignment);
}
}  // namespace

std::size_t BufferPool::aligned_size(std::size_t nbytes) {
    return std::bit_ceil(std::max(nbytes, min_block));
}

BufferPool::BufferPool(std::size_t budget_bytes, bool bypass)
    : budget_(budget_bytes), bypass_(bypass) {}

BufferPool::~BufferPool() {
    for (auto& [id, block] : allocated_) free_bytes(block.data);
    for (auto& block : free_) free_bytes(block.data);
}

BufferPool::Handle BufferPool::acquire(std::size_t nbytes) {
    if (nbytes == 0) throw config_error("cannot acquire an empty block");
    const std::size_t want = aligned_size(nbytes);

    std::unique_lock lock(mutex_);

    if (!bypass_) {
        for (auto it = free_.begin(); it != free_.end(); ++it) {
            if (it->aligned_size >= want) {
                Block block = *it;
                free_.erase(it);
                allocated_.emplace(block.id, block);
                ++stats_.reuses;
                return {block.data, block.aligned_size, block.id};
            }
        }
    }

    if (footprint_ + want > budget_)
        throw budget_exhausted_error("pool budget of " + std::to_string(budget_) +
                                     " bytes cannot fit another " + std::to_string(want) +
                                     " (in use: " + std::to_string(footprint_) + ")");

    Block block{allocate_bytes(want), want, next_id_++};
    footprint_ += want;
    stats_.peak_bytes = std::max<std::uint64_t>(stats_.peak_bytes, footprint_);
    ++stats_.raw_allocations;
    allocated_.emplace(block.id, block);
    return {block.data, block.aligned_size, block.id};
}

void BufferPool::release(const Handle& handle) {
    std::unique_lock lock(mutex_);
    auto it = allocated_.find(handle.id);
    if (it == allocated_.end())
        throw invalid_handle_error("release of a block that is not currently allocated (id " +
                                   std::to_string(handle.id) + ")");
    Block block = it->second;
    allocated_.erase(it);
    if (bypass_) {
        footprint_ -= block.aligned_size;
        free_bytes(block.data);
        return;
    }
    free_.push_back(block);
}

PoolStats BufferPool::stats() const {
    std::shared_lock lock(mutex_);
    return stats_;
}

std::size_t BufferPool::footprint_bytes() const {
    std::shared_lock lock(mutex_);
    return footprint_;
}

std::size_t BufferPool::allocated_count() const {
    std::shared_lock lock(mutex_);
    return allocated_.size();
}

std::size_t BufferPool::free_count() const {
    std::shared_lock lock(mutex_);
    return free_.size();
}

}  // namespace pulsegrid
