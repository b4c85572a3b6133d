#include "steam/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace steam::kernels {

namespace {

// Every parallel loop below iterates over disjoint output elements and
// accumulates in a fixed serial order within each element, so results are
// bitwise identical to the serial kernels for any thread count.

inline std::int64_t out_size(std::int64_t in, std::int64_t k, std::int64_t stride, std::int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n) {
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) c[i * n + j] = 0.0;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_at_b_accum(const double* a, const double* b, double* c,
                       std::int64_t k, std::int64_t m, std::int64_t n) {
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* brow = b + p * n;
            double* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_a_bt_accum(const double* a, const double* b, double* c,
                       std::int64_t m, std::int64_t k, std::int64_t n) {
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            const double* arow = a + i * k;
            const double* brow = b + j * k;
            for (std::int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] += acc;
        }
    }
}

void conv2d_forward(const double* x, const double* w, double* y,
                    std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                    std::int64_t cout, std::int64_t kh, std::int64_t kw,
                    std::int64_t stride, std::int64_t pad) {
    const std::int64_t ho = out_size(h, kh, stride, pad);
    const std::int64_t wo = out_size(wd, kw, stride, pad);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t img = 0; img < n; ++img) {
        for (std::int64_t oc = 0; oc < cout; ++oc) {
            for (std::int64_t oy = 0; oy < ho; ++oy) {
                for (std::int64_t ox = 0; ox < wo; ++ox) {
                    double acc = 0.0;
                    for (std::int64_t ic = 0; ic < cin; ++ic) {
                        const double* xp = x + ((img * cin + ic) * h) * wd;
                        const double* wp = w + ((oc * cin + ic) * kh) * kw;
                        for (std::int64_t ky = 0; ky < kh; ++ky) {
                            const std::int64_t iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= wd) continue;
                                acc += xp[iy * wd + ix] * wp[ky * kw + kx];
                            }
                        }
                    }
                    y[(((img * cout + oc) * ho) + oy) * wo + ox] = acc;
                }
            }
        }
    }
}

void conv2d_backward_input(const double* dy, const double* w, double* dx,
                           std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                           std::int64_t cout, std::int64_t kh, std::int64_t kw,
                           std::int64_t stride, std::int64_t pad) {
    const std::int64_t ho = out_size(h, kh, stride, pad);
    const std::int64_t wo = out_size(wd, kw, stride, pad);
    // gather form: each input element accumulates from the outputs it fed
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t img = 0; img < n; ++img) {
        for (std::int64_t ic = 0; ic < cin; ++ic) {
            for (std::int64_t iy = 0; iy < h; ++iy) {
                for (std::int64_t ix = 0; ix < wd; ++ix) {
                    double acc = 0.0;
                    for (std::int64_t oc = 0; oc < cout; ++oc) {
                        const double* dyp = dy + ((img * cout + oc) * ho) * wo;
                        const double* wp = w + ((oc * cin + ic) * kh) * kw;
                        for (std::int64_t ky = 0; ky < kh; ++ky) {
                            const std::int64_t num = iy + pad - ky;
                            if (num < 0 || num % stride != 0) continue;
                            const std::int64_t oy = num / stride;
                            if (oy >= ho) continue;
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t numx = ix + pad - kx;
                                if (numx < 0 || numx % stride != 0) continue;
                                const std::int64_t ox = numx / stride;
                                if (ox >= wo) continue;
                                acc += dyp[oy * wo + ox] * wp[ky * kw + kx];
                            }
                        }
                    }
                    dx[((img * cin + ic) * h + iy) * wd + ix] += acc;
                }
            }
        }
    }
}

void conv2d_backward_weight(const double* dy, const double* x, double* dw,
                            std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                            std::int64_t cout, std::int64_t kh, std::int64_t kw,
                            std::int64_t stride, std::int64_t pad) {
    const std::int64_t ho = out_size(h, kh, stride, pad);
    const std::int64_t wo = out_size(wd, kw, stride, pad);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t oc = 0; oc < cout; ++oc) {
        for (std::int64_t ic = 0; ic < cin; ++ic) {
            for (std::int64_t ky = 0; ky < kh; ++ky) {
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                    double acc = 0.0;
                    for (std::int64_t img = 0; img < n; ++img) {
                        const double* dyp = dy + ((img * cout + oc) * ho) * wo;
                        const double* xp = x + ((img * cin + ic) * h) * wd;
                        for (std::int64_t oy = 0; oy < ho; ++oy) {
                            const std::int64_t iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (std::int64_t ox = 0; ox < wo; ++ox) {
                                const std::int64_t ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= wd) continue;
                                acc += dyp[oy * wo + ox] * xp[iy * wd + ix];
                            }
                        }
                    }
                    dw[((oc * cin + ic) * kh + ky) * kw + kx] += acc;
                }
            }
        }
    }
}

namespace serial {

void matmul(const double* a, const double* b, double* c,
            std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < n; ++j) c[i * n + j] = 0.0;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            for (std::int64_t j = 0; j < n; ++j) c[i * n + j] += av * b[p * n + j];
        }
    }
}

void conv2d_forward(const double* x, const double* w, double* y,
                    std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                    std::int64_t cout, std::int64_t kh, std::int64_t kw,
                    std::int64_t stride, std::int64_t pad) {
    const std::int64_t ho = out_size(h, kh, stride, pad);
    const std::int64_t wo = out_size(wd, kw, stride, pad);
    for (std::int64_t img = 0; img < n; ++img)
        for (std::int64_t oc = 0; oc < cout; ++oc)
            for (std::int64_t oy = 0; oy < ho; ++oy)
                for (std::int64_t ox = 0; ox < wo; ++ox) {
                    double acc = 0.0;
                    for (std::int64_t ic = 0; ic < cin; ++ic)
                        for (std::int64_t ky = 0; ky < kh; ++ky)
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t iy = oy * stride - pad + ky;
                                const std::int64_t ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                acc += x[((img * cin + ic) * h + iy) * wd + ix] *
                                       w[((oc * cin + ic) * kh + ky) * kw + kx];
                            }
                    y[((img * cout + oc) * ho + oy) * wo + ox] = acc;
                }
}

void conv2d_backward_input(const double* dy, const double* w, double* dx,
                           std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                           std::int64_t cout, std::int64_t kh, std::int64_t kw,
                           std::int64_t stride, std::int64_t pad) {
    const std::int64_t ho = out_size(h, kh, stride, pad);
    const std::int64_t wo = out_size(wd, kw, stride, pad);
    for (std::int64_t img = 0; img < n; ++img)
        for (std::int64_t ic = 0; ic < cin; ++ic)
            for (std::int64_t iy = 0; iy < h; ++iy)
                for (std::int64_t ix = 0; ix < wd; ++ix) {
                    double acc = 0.0;
                    for (std::int64_t oc = 0; oc < cout; ++oc)
                        for (std::int64_t ky = 0; ky < kh; ++ky)
                            for (std::int64_t kx = 0; kx < kw; ++kx) {
                                const std::int64_t numy = iy + pad - ky;
                                const std::int64_t numx = ix + pad - kx;
                                if (numy < 0 || numy % stride != 0) continue;
                                if (numx < 0 || numx % stride != 0) continue;
                                const std::int64_t oy = numy / stride;
                                const std::int64_t ox = numx / stride;
                                if (oy >= ho || ox >= wo) continue;
                                acc += dy[((img * cout + oc) * ho + oy) * wo + ox] *
                                       w[((oc * cin + ic) * kh + ky) * kw + kx];
                            }
                    dx[((img * cin + ic) * h + iy) * wd + ix] += acc;
                }
}

void conv2d_backward_weight(const double* dy, const double* x, double* dw,
                            std::int64_t n, std::int64_t cin, std::int64_t h, std::int64_t wd,
                            std::int64_t cout, std::int64_t kh, std::int64_t kw,
                            std::int64_t stride, std::int64_t pad) {
    const std::int64_t ho = out_size(h, kh, stride, pad);
    const std::int64_t wo = out_size(wd, kw, stride, pad);
    for (std::int64_t oc = 0; oc < cout; ++oc)
        for (std::int64_t ic = 0; ic < cin; ++ic)
            for (std::int64_t ky = 0; ky < kh; ++ky)
                for (std::int64_t kx = 0; kx < kw; ++kx) {
                    double acc = 0.0;
                    for (std::int64_t img = 0; img < n; ++img)
                        for (std::int64_t oy = 0; oy < ho; ++oy)
                            for (std::int64_t ox = 0; ox < wo; ++ox) {
                                const std::int64_t iy = oy * stride - pad + ky;
                                const std::int64_t ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                acc += dy[((img * cout + oc) * ho + oy) * wo + ox] *
                                       x[((img * cin + ic) * h + iy) * wd + ix];
                            }
                    dw[((oc * cin + ic) * kh + ky) * kw + kx] += acc;
                }
}

}  // namespace serial

}  // namespace steam::kernels
