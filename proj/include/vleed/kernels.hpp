#pragma once

#include <cstddef>

#include "vleed/tensor.hpp"

namespace vleed::kernels {

// Dense kernels behind every forward/backward pass. The omp variants
// partition work over output rows; each output element is accumulated in
// the same k-order as the serial reference, so both paths are bit-identical
// for any thread count. The serial reference lives in kernels::serial and
// stays the comparison target for tests and the benchmark tool.

namespace serial {

// C[m,n] = A[m,k] * B[k,n]
void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);

// C[m,n] = A^T * B with A[k,m], B[k,n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
               std::size_t n);

// C[m,n] = A * B^T with A[m,k], B[n,k]
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);

// scores[p] = dot(x[row_a[p]], x[row_b[p]]) over rows of X[n,d]
void pair_dots(const double* x, std::size_t d, const std::size_t* rows_a,
               const std::size_t* rows_b, double* scores, std::size_t num_pairs);

}  // namespace serial

void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
            std::size_t n);
void matmul_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
               std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n);
void pair_dots(const double* x, std::size_t d, const std::size_t* rows_a,
               const std::size_t* rows_b, double* scores, std::size_t num_pairs);

// Tensor conveniences (parallel path).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);

}  // namespace vleed::kernels
