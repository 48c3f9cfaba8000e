#pragma once

#include <cstddef>
#include <cstdint>

namespace ebsig::kern {

// Hot-loop primitives used by the mixture fitters. Every routine has a
// portable scalar form and (on x86-64 with AVX2+FMA) a vector form; the two
// agree to roundoff, with reductions allowed to reassociate.
struct Ops {
    const char* name;

    // sum(a) over n elements.
    double (*sum)(const double* a, std::size_t n);
    // dot(a, b).
    double (*dot)(const double* a, const double* b, std::size_t n);
    // sum of a[i] * tab[idx[i]].
    double (*dot_gather)(const double* a, const double* tab,
                         const std::int32_t* idx, std::size_t n);
    // sum of m[i] + log(acc[i]); acc[i] must be positive.
    double (*sum_add_log)(const double* m, const double* acc, std::size_t n);
    // sum of tau[i] * e[i] * (cnt[i] + r) / (1 + e[i] * h).
    double (*fp_denom)(const double* tau, const double* e, const double* cnt,
                       double r, double h, std::size_t n);
    // y[i] += a * x[i].
    void (*axpy)(double* y, const double* x, double a, std::size_t n);
    // dst[i] = max(dst[i], src[i]).
    void (*vmax)(double* dst, const double* src, std::size_t n);
    // dst[i] = 1 / dst[i].
    void (*recip)(double* dst, std::size_t n);
    // dst[i] *= src[i].
    void (*mul)(double* dst, const double* src, std::size_t n);
    // dst[i] = log1p(e[i] * h).
    void (*log1p_scale)(double* dst, const double* e, double h, std::size_t n);
    // lp[i] = exp(lp[i] - m[i]); acc[i] += lp[i]. Arguments are expected to
    // satisfy lp[i] <= m[i] (softmax shift), so results lie in [0, 1].
    void (*exp_sub_store_add)(double* lp, const double* m, double* acc,
                              std::size_t n);
    // Negative-binomial log-pmf assembly against precomputed per-cell pieces:
    //   lp[i] = A + tab[idx[i]] + c0[i] + cnt[i]*B - (r + cnt[i]) * l1p[i]
    // where tab holds lgamma(r+count)-lgamma(r) keyed by distinct count index,
    // c0[i] = -lgamma(cnt[i]+1) + cnt[i]*log(E[i]), B = log h, A = log weight.
    void (*nb_logpmf)(double* lp, const std::int32_t* idx, const double* tab,
                      const double* c0, const double* cnt, const double* l1p,
                      double A, double B, double r, std::size_t n);
};

const Ops& scalar_ops();

// The vector table; equals scalar_ops() on builds without AVX2 sources.
const Ops& avx2_ops();

// True when the running CPU has AVX2+FMA and the build carries the kernels.
bool avx2_available();

// Table used by the fitters: the AVX2 one when available, else scalar.
// EBSIG_KERNELS=scalar|avx2 overrides (checked once, at first use).
const Ops& active();

}  // namespace ebsig::kern
