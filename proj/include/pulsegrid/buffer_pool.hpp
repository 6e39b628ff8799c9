#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <shared_mutex>
#include <span>
#include <unordered_map>

#include "pulsegrid/errors.hpp"

namespace pulsegrid {

struct PoolStats {
    std::uint64_t raw_allocations = 0;
    std::uint64_t reuses = 0;
    std::uint64_t peak_bytes = 0;
};

/// Two-queue pooled allocator: an allocated-block queue and a free-block
/// queue. Requests are aligned up to the next power of two (floored at 256
/// bytes); acquire scans the free queue first-fit and only falls back to a
/// fresh allocation on a miss. Released blocks go back to the free queue and
/// stay alive until the pool is destroyed, so repeated loop temporaries cost
/// one raw allocation per size class. Safe for concurrent use: queue mutation
/// is exclusive, stats reads are shared.
class BufferPool {
  public:
    /// bypass = true disables reuse entirely (every acquire is a raw
    /// allocation, every release frees); for measuring what the pool saves.
    explicit BufferPool(std::size_t budget_bytes, bool bypass = false);
    ~BufferPool();

    BufferPool(const BufferPool&) = delete;
    BufferPool& operator=(const BufferPool&) = delete;

    struct Handle {
        std::byte* data = nullptr;
        std::size_t aligned_size = 0;
        std::uint64_t id = 0;
    };

    Handle acquire(std::size_t nbytes);
    void release(const Handle& handle);

    PoolStats stats() const;
    std::size_t budget() const { return budget_; }
    /// Total bytes currently held by the pool (free + allocated).
    std::size_t footprint_bytes() const;
    std::size_t allocated_count() const;
    std::size_t free_count() const;

    static std::size_t aligned_size(std::size_t nbytes);

    /// RAII wrapper; releases on destruction.
    class Lease {
      public:
        Lease() = default;
        Lease(BufferPool* pool, Handle handle) : pool_(pool), handle_(handle) {}
        Lease(Lease&& other) noexcept : pool_(other.pool_), handle_(other.handle_) {
            other.pool_ = nullptr;
        }
        Lease& operator=(Lease&& other) noexcept {
            reset();
            pool_ = other.pool_;
            handle_ = other.handle_;
            other.pool_ = nullptr;
            return *this;
        }
        Lease(const Lease&) = delete;
        Lease& operator=(const Lease&) = delete;
        ~Lease() { reset(); }

        void reset() {
            if (pool_) pool_->release(handle_);
            pool_ = nullptr;
        }

        template <typename T>
        std::span<T> as_span(std::size_t count) const {
            return {reinterpret_cast<T*>(handle_.data), count};
        }
        const Handle& handle() const { return handle_; }

      private:
        BufferPool* pool_ = nullptr;
        Handle handle_;
    };

    Lease lease(std::size_t nbytes) { return Lease(this, acquire(nbytes)); }

  private:
    struct Block {
        std::byte* data;
        std::size_t aligned_size;
        std::uint64_t id;
    };

    std::size_t budget_;
    bool bypass_;

    mutable std::shared_mutex mutex_;
    std::unordered_map<std::uint64_t, Block> allocated_;
    std::deque<Block> free_;
    std::size_t footprint_ = 0;
    std::uint64_t next_id_ = 1;
    PoolStats stats_;
};

}  // namespace pulsegrid
