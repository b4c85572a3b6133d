#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "steam/kernels.hpp"
#include "steam/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = clock_type::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = clock_type::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill(std::vector<double>& v, steam::Rng& rng) {
    for (auto& x : v) x = rng.normal();
}

}  // namespace

int main() {
    steam::Rng rng(7);

    std::printf("%-28s %12s %12s %8s\n", "kernel", "serial ms", "openmp ms", "speedup");

    for (const std::int64_t n : {128, 256, 512}) {
        std::vector<double> a(static_cast<std::size_t>(n * n)), b(a.size()), c(a.size());
        fill(a, rng);
        fill(b, rng);
        const double ts = time_ms([&] { steam::kernels::serial::matmul(a.data(), b.data(), c.data(), n, n, n); }, 3);
        const double tp = time_ms([&] { steam::kernels::matmul(a.data(), b.data(), c.data(), n, n, n); }, 3);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n",
                    ("matmul " + std::to_string(n) + "^3").c_str(), ts, tp, ts / tp);
    }

    for (const std::int64_t ch : {16, 32, 64}) {
        const std::int64_t batch = 8, hw = 28, kk = 3;
        std::vector<double> x(static_cast<std::size_t>(batch * ch * hw * hw));
        std::vector<double> w(static_cast<std::size_t>(ch * ch * kk * kk));
        std::vector<double> y(static_cast<std::size_t>(batch * ch * hw * hw));
        fill(x, rng);
        fill(w, rng);
        const double ts = time_ms(
            [&] {
                std::fill(y.begin(), y.end(), 0.0);
                steam::kernels::serial::conv2d_forward(x.data(), w.data(), y.data(), batch, ch, hw,
                                                       hw, ch, kk, kk, 1, 1);
            },
            3);
        const double tp = time_ms(
            [&] {
                std::fill(y.begin(), y.end(), 0.0);
                steam::kernels::conv2d_forward(x.data(), w.data(), y.data(), batch, ch, hw, hw, ch,
                                               kk, kk, 1, 1);
            },
            3);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n",
                    ("conv2d 8x" + std::to_string(ch) + "x28x28").c_str(), ts, tp, ts / tp);
    }
    return 0;
}
