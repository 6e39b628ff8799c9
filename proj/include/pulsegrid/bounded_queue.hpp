#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>

namespace pulsegrid {

/// Bounded blocking many-producer many-consumer queue. put() blocks while
/// full, take() blocks while empty; close() lets consumers drain what is left
/// and then unblocks them with nullopt. No item is lost or duplicated.
template <typename T>
class BoundedQueue {
  public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    void put(T item) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) throw std::logic_error("put on a closed queue");
        items_.push_back(std::move(item));
        lock.unlock();
        not_empty_.notify_one();
    }

    std::optional<T> take() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;  // closed and drained
        T item = std::move(items_.front());
        items_.pop_front();
        lock.unlock();
        not_full_.notify_one();
        return item;
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }

  private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    bool closed_ = false;
};

}  // namespace pulsegrid
