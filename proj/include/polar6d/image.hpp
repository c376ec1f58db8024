#pragma once

#include <cassert>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <span>
#include <thread>
#include <vector>

namespace polar6d {

/// Dense row-major 2D grid. (0,0) is the top-left pixel.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<size_t>(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& operator()(int x, int y) {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_);
        return data_[static_cast<size_t>(y) * width_ + x];
    }
    const T& operator()(int x, int y) const {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_);
        return data_[static_cast<size_t>(y) * width_ + x];
    }
    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    std::span<T> pixels() { return data_; }
    std::span<const T> pixels() const { return data_; }

    bool same_size(int w, int h) const { return width_ == w && height_ == h; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using Mask = Image<uint8_t>;

inline int thread_count() {
    if (const char* env = std::getenv("POLAR6D_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(i) for i in [0, n). Partitioning never affects results as long
/// as iterations touch disjoint state.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
    int threads = thread_count();
    if (threads <= 1 || n < 1024) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t chunk = (n + threads - 1) / threads;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        size_t lo = t * chunk;
        if (lo >= n) break;
        size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([lo, hi, &fn] {
            for (size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

/// Pairwise tree sum; result does not depend on thread count or chunking.
inline double pairwise_sum(std::span<const double> v) {
    if (v.empty()) return 0.0;
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

} // namespace polar6d
