#include <array>
#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vleed/kernels.hpp"
#include "vleed/rng.hpp"

// Times the serial reference kernels against the OpenMP ones on the matmul
// shapes the training loop actually hits, and checks they agree bit for bit.

using vleed::Rng;
using vleed::Tensor;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Tensor t = Tensor::matrix(r, c);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dt < best) best = dt;
    }
    return best;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp enabled, max threads = %d\n", omp_get_max_threads());
#else
    std::printf("openmp disabled (serial build)\n");
#endif

    Rng rng(42);
    const std::vector<std::array<std::size_t, 3>> shapes = {
        {256, 64, 512},    // input layer at desk scale
        {256, 512, 512},   // hidden layers
        {256, 512, 480},   // residual head
        {1024, 512, 512},  // large batch
    };

    bool all_equal = true;
    std::printf("%-22s %12s %12s %8s\n", "shape (m x k x n)", "serial [ms]", "openmp [ms]",
                "speedup");
    for (const auto& [m, k, n] : shapes) {
        const Tensor a = random_matrix(rng, m, k);
        const Tensor b = random_matrix(rng, k, n);
        Tensor cs = Tensor::matrix(m, n);
        Tensor cp = Tensor::matrix(m, n);

        const double ts = time_best_of(5, [&] {
            vleed::kernels::serial::matmul(a.data(), b.data(), cs.data(), m, k, n);
        });
        const double tp = time_best_of(5, [&] {
            vleed::kernels::matmul(a.data(), b.data(), cp.data(), m, k, n);
        });
        const bool equal = bitwise_equal(cs, cp);
        all_equal = all_equal && equal;
        std::printf("%5zu x %4zu x %4zu   %12.3f %12.3f %7.2fx %s\n", m, k, n, ts * 1e3, tp * 1e3,
                    ts / tp, equal ? "" : "  MISMATCH");
    }
    std::printf("bitwise serial/openmp agreement: %s\n", all_equal ? "yes" : "NO");
    return all_equal ? 0 : 1;
}
