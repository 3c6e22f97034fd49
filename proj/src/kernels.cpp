#include "vleed/kernels.hpp"

#include <algorithm>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vleed::kernels {

namespace serial {

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        const double* ai = a + i * k;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            const double* bt = b + t * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
               std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t t = 0; t < k; ++t) {
            const double av = a[t * m + i];
            const double* bt = b + t * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double s = 0.0;
            for (std::size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
            ci[j] = s;
        }
    }
}

void pair_dots(const double* x, std::size_t d, const std::size_t* rows_a,
               const std::size_t* rows_b, double* scores, std::size_t num_pairs) {
    for (std::size_t p = 0; p < num_pairs; ++p) {
        const double* u = x + rows_a[p] * d;
        const double* v = x + rows_b[p] * d;
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) s += u[t] * v[t];
        scores[p] = s;
    }
}

}  // namespace serial

namespace {
using Index = long long;  // omp loop index must be signed
}

// Row blocks keep one tile of A (and the matching C rows) hot in L2 while B
// streams through once per block instead of once per row. Every C element
// still accumulates in ascending-t order, so the results stay bit-identical
// to the serial reference for any thread count.
namespace {
constexpr std::size_t kRowBlock = 48;
}

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n) {
    const Index blocks = static_cast<Index>((m + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(static)
    for (Index blk = 0; blk < blocks; ++blk) {
        const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
        const std::size_t i1 = std::min(m, i0 + kRowBlock);
        std::memset(c + i0 * n, 0, (i1 - i0) * n * sizeof(double));
        for (std::size_t t = 0; t < k; ++t) {
            const double* bt = b + t * n;
            for (std::size_t i = i0; i < i1; ++i) {
                const double av = a[i * k + t];
                double* ci = c + i * n;
                for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
            }
        }
    }
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
               std::size_t n) {
    const Index blocks = static_cast<Index>((m + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(static)
    for (Index blk = 0; blk < blocks; ++blk) {
        const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
        const std::size_t i1 = std::min(m, i0 + kRowBlock);
        std::memset(c + i0 * n, 0, (i1 - i0) * n * sizeof(double));
        for (std::size_t t = 0; t < k; ++t) {
            const double* at = a + t * m;
            const double* bt = b + t * n;
            for (std::size_t i = i0; i < i1; ++i) {
                const double av = at[i];
                double* ci = c + i * n;
                for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
            }
        }
    }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
    const Index blocks = static_cast<Index>((m + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(static)
    for (Index blk = 0; blk < blocks; ++blk) {
        const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
        const std::size_t i1 = std::min(m, i0 + kRowBlock);
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            for (std::size_t i = i0; i < i1; ++i) {
                const double* ai = a + i * k;
                double s = 0.0;
                for (std::size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
                c[i * n + j] = s;
            }
        }
    }
}

void pair_dots(const double* x, std::size_t d, const std::size_t* rows_a,
               const std::size_t* rows_b, double* scores, std::size_t num_pairs) {
#pragma omp parallel for schedule(static)
    for (Index p = 0; p < static_cast<Index>(num_pairs); ++p) {
        const double* u = x + rows_a[p] * d;
        const double* v = x + rows_b[p] * d;
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) s += u[t] * v[t];
        scores[p] = s;
    }
}

namespace {

void check_mm(const Tensor& a, const Tensor& b, std::size_t a_inner, std::size_t b_inner,
              const char* op) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ContractViolation(std::string(op) + ": rank-2 tensors required");
    if (a_inner != b_inner)
        throw ContractViolation(std::string(op) + ": inner dimension mismatch " +
                                Tensor::shape_str(a) + " vs " + Tensor::shape_str(b));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_mm(a, b, a.cols(), b.rows(), "matmul");
    Tensor c = Tensor::matrix(a.rows(), b.cols());
    matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    check_mm(a, b, a.rows(), b.rows(), "matmul_tn");
    Tensor c = Tensor::matrix(a.cols(), b.cols());
    matmul_tn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_mm(a, b, a.cols(), b.cols(), "matmul_nt");
    Tensor c = Tensor::matrix(a.rows(), b.rows());
    matmul_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
    return c;
}

}  // namespace vleed::kernels
