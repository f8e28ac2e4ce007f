#pragma once

#include <atomic>
#include <cstddef>
#include <vector>

namespace nrad {

// Allocation accounting for the streaming processor. Two categories:
//   work      — per-hypothesis accumulators, per-batch scratch, output maps
//   raw_input — staged raw input samples (must never exceed 2 batches)
class MemoryMeter {
public:
    void add_work(std::size_t bytes) { bump(work_current_, work_high_, bytes); }
    void sub_work(std::size_t bytes) { work_current_ -= bytes; }
    void add_raw(std::size_t bytes) { bump(raw_current_, raw_high_, bytes); }
    void sub_raw(std::size_t bytes) { raw_current_ -= bytes; }

    std::size_t work_high_water() const { return work_high_.load(); }
    std::size_t raw_high_water() const { return raw_high_.load(); }
    std::size_t work_current() const { return work_current_.load(); }

    void reset() {
        work_current_ = 0;
        work_high_ = 0;
        raw_current_ = 0;
        raw_high_ = 0;
    }

private:
    static void bump(std::atomic<std::size_t>& cur, std::atomic<std::size_t>& high,
                     std::size_t bytes) {
        const std::size_t now = cur.fetch_add(bytes) + bytes;
        std::size_t prev = high.load();
        while (prev < now && !high.compare_exchange_weak(prev, now)) {
        }
    }

    std::atomic<std::size_t> work_current_{0};
    std::atomic<std::size_t> work_high_{0};
    std::atomic<std::size_t> raw_current_{0};
    std::atomic<std::size_t> raw_high_{0};
};

// std::vector wrapper that reports its capacity to a meter for its lifetime.
template <class T>
class MeteredBuffer {
public:
    MeteredBuffer(std::size_t n, MemoryMeter* meter, bool raw_input = false)
        : data_(n), meter_(meter), raw_(raw_input) {
        if (meter_) {
            bytes_ = n * sizeof(T);
            raw_ ? meter_->add_raw(bytes_) : meter_->add_work(bytes_);
        }
    }
    ~MeteredBuffer() {
        if (meter_) raw_ ? meter_->sub_raw(bytes_) : meter_->sub_work(bytes_);
    }
    MeteredBuffer(const MeteredBuffer&) = delete;
    MeteredBuffer& operator=(const MeteredBuffer&) = delete;
    MeteredBuffer(MeteredBuffer&& other) noexcept
        : data_(std::move(other.data_)), meter_(other.meter_), raw_(other.raw_),
          bytes_(other.bytes_) {
        other.meter_ = nullptr;
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }
    std::vector<T>& vec() { return data_; }

private:
    std::vector<T> data_;
    MemoryMeter* meter_;
    bool raw_;
    std::size_t bytes_ = 0;
};

}  // namespace nrad
