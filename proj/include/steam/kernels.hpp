#pragma once

#include <cstdint>

namespace steam::kernels {

// Dense numeric kernels. The primary versions parallelize with OpenMP over
// independent output elements, so results are bitwise identical for any
// thread count. The serial namespace keeps straight-loop references used by
// the test suite and the benchmark target.

// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n);

// c[m x n] += a[k x m]^T * b[k x n]
void matmul_at_b_accum(const double* a, const double* b, double* c,
                       std::int64_t k, std::int64_t m, std::int64_t n);

// c[m x n] += a[m x k] * b[n x k]^T
void matmul_a_bt_accum(const double* a, const double* b, double* c,
                       std::int64_t m, std::int64_t k, std::int64_t n);

// Cross-correlation convention. x: [N,Cin,H,W], w: [Cout,Cin,kh,kw],
// y: [N,Cout,Ho,Wo] with Ho=(H+2p-kh)/s+1.
void conv2d_forward(const double* x, const double* w, double* y,
                    std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                    std::int64_t cout, std::int64_t kh, std::int64_t kw,
                    std::int64_t stride, std::int64_t pad);

// dx[N,Cin,H,W] += conv backward w.r.t. input
void conv2d_backward_input(const double* dy, const double* w, double* dx,
                           std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                           std::int64_t cout, std::int64_t kh, std::int64_t kw,
                           std::int64_t stride, std::int64_t pad);

// dw[Cout,Cin,kh,kw] += conv backward w.r.t. weights
void conv2d_backward_weight(const double* dy, const double* x, double* dw,
                            std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                            std::int64_t cout, std::int64_t kh, std::int64_t kw,
                            std::int64_t stride, std::int64_t pad);

namespace serial {

void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n);

void conv2d_forward(const double* x, const double* w, double* y,
                    std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                    std::int64_t cout, std::int64_t kh, std::int64_t kw,
                    std::int64_t stride, std::int64_t pad);

void conv2d_backward_input(const double* dy, const double* w, double* dx,
                           std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                           std::int64_t cout, std::int64_t kh, std::int64_t kw,
                           std::int64_t stride, std::int64_t pad);

void conv2d_backward_weight(const double* dy, const double* x, double* dw,
                            std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                            std::int64_t cout, std::int64_t kh, std::int64_t kw,
                            std::int64_t stride, std::int64_t pad);

}  // namespace serial

}  // namespace steam::kernels
