#include "qfit/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace qfit {

namespace {
constexpr size_t kInlineThreshold = 1 << 14;
}

int max_workers() {
    if (const char* env = std::getenv("QFIT_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn) {
    int workers = max_workers();
    if (n == 0) return;
    if (workers <= 1 || n < kInlineThreshold) {
        fn(0, n);
        return;
    }
    size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) {
        size_t b = std::min(n, chunk * w);
        size_t e = std::min(n, chunk * (w + 1));
        if (b < e) pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(0, std::min(n, chunk));
    for (auto& t : pool) t.join();
}

}  // namespace qfit
