// AVX2+FMA variants of the hot-loop primitives. Built only on x86-64; the
// translation unit is compiled with -mavx2 -mfma and must not be entered on
// CPUs without those features (the dispatcher checks first).

#include <immintrin.h>

#include <cmath>

#include "ebsig/kernels.hpp"

namespace ebsig::kern {
namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// exp() for nonpositive-to-moderate arguments, Cephes rational form:
// reduce x = n*ln2 + y, evaluate e^y = 1 + 2P(y)/(Q(y)-P(y)), scale by 2^n.
__m256d vexp(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
    const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
    const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
    const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
    const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
    const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
    const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
    const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d lo_cut = _mm256_set1_pd(-708.0);
    const __m256d hi_cut = _mm256_set1_pd(709.0);

    __m256d xin = x;
    x = _mm256_min_pd(x, hi_cut);
    x = _mm256_max_pd(x, lo_cut);

    __m256d px = _mm256_floor_pd(_mm256_fmadd_pd(log2e, x, half));
    __m128i n32 = _mm256_cvtpd_epi32(px);
    x = _mm256_fnmadd_pd(px, c1, x);
    x = _mm256_fnmadd_pd(px, c2, x);

    __m256d xx = _mm256_mul_pd(x, x);
    __m256d pe = _mm256_mul_pd(
        x, _mm256_fmadd_pd(_mm256_fmadd_pd(p0, xx, p1), xx, p2));
    __m256d qe = _mm256_fmadd_pd(
        _mm256_fmadd_pd(_mm256_fmadd_pd(q0, xx, q1), xx, q2), xx, q3);
    __m256d frac = _mm256_fmadd_pd(
        _mm256_set1_pd(2.0), _mm256_div_pd(pe, _mm256_sub_pd(qe, pe)), one);

    __m256i n64 = _mm256_cvtepi32_epi64(n32);
    __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    __m256d scale = _mm256_castsi256_pd(bits);
    __m256d out = _mm256_mul_pd(frac, scale);

    // Flush deep underflow to zero so downstream accumulations see clean 0s.
    __m256d tiny = _mm256_cmp_pd(xin, lo_cut, _CMP_LT_OQ);
    return _mm256_andnot_pd(tiny, out);
}

// log() for strictly positive finite inputs: split x = m * 2^e with
// m in [sqrt(1/2), sqrt(2)), then log m = 2 atanh((m-1)/(m+1)) by series.
__m256d vlog(__m256d x) {
    const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
    const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
    const __m256d sqrt2 = _mm256_set1_pd(1.41421356237309504880);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d half = _mm256_set1_pd(0.5);
    const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

    __m256i ibits = _mm256_castpd_si256(x);
    __m256i exp_raw = _mm256_srli_epi64(ibits, 52);
    // Exponents fit in int32; pack the four int64 lanes down for conversion.
    __m256i packed = _mm256_permutevar8x32_epi32(
        exp_raw, _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0));
    __m256d e = _mm256_cvtepi32_pd(_mm256_castsi256_si128(packed));
    e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));

    __m256d m = _mm256_castsi256_pd(
        _mm256_or_si256(_mm256_and_si256(ibits, mant_mask), one_bits));
    __m256d big = _mm256_cmp_pd(m, sqrt2, _CMP_GT_OQ);
    m = _mm256_blendv_pd(m, _mm256_mul_pd(m, half), big);
    e = _mm256_add_pd(e, _mm256_and_pd(big, one));

    __m256d z = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
    __m256d s = _mm256_mul_pd(z, z);
    __m256d poly = _mm256_set1_pd(1.0 / 19.0);
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 17.0));
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 15.0));
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 13.0));
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 11.0));
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 9.0));
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 7.0));
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 5.0));
    poly = _mm256_fmadd_pd(poly, s, _mm256_set1_pd(1.0 / 3.0));
    __m256d z3 = _mm256_mul_pd(z, s);
    __m256d logm = _mm256_fmadd_pd(_mm256_set1_pd(2.0), _mm256_mul_pd(z3, poly),
                                   _mm256_add_pd(z, z));
    return _mm256_fmadd_pd(e, ln2_hi, _mm256_fmadd_pd(e, ln2_lo, logm));
}

double a_sum(const double* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double out = hsum(acc);
    for (; i < n; ++i) out += a[i];
    return out;
}

double a_dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double out = hsum(acc);
    for (; i < n; ++i) out += a[i] * b[i];
    return out;
}

double a_dot_gather(const double* a, const double* tab, const std::int32_t* idx,
                    std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m128i ix = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
        __m256d t = _mm256_i32gather_pd(tab, ix, 8);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), t, acc);
    }
    double out = hsum(acc);
    for (; i < n; ++i) out += a[i] * tab[idx[i]];
    return out;
}

double a_sum_add_log(const double* m, const double* acc_in, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d lg = vlog(_mm256_loadu_pd(acc_in + i));
        acc = _mm256_add_pd(acc, _mm256_add_pd(_mm256_loadu_pd(m + i), lg));
    }
    double out = hsum(acc);
    for (; i < n; ++i) out += m[i] + std::log(acc_in[i]);
    return out;
}

double a_fp_denom(const double* tau, const double* e, const double* cnt,
                  double r, double h, std::size_t n) {
    const __m256d rv = _mm256_set1_pd(r);
    const __m256d hv = _mm256_set1_pd(h);
    const __m256d one = _mm256_set1_pd(1.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d ev = _mm256_loadu_pd(e + i);
        __m256d num = _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(tau + i), ev),
                                    _mm256_add_pd(_mm256_loadu_pd(cnt + i), rv));
        __m256d den = _mm256_fmadd_pd(ev, hv, one);
        acc = _mm256_add_pd(acc, _mm256_div_pd(num, den));
    }
    double out = hsum(acc);
    for (; i < n; ++i)
        out += tau[i] * e[i] * (cnt[i] + r) / (1.0 + e[i] * h);
    return out;
}

void a_axpy(double* y, const double* x, double a, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void a_vmax(double* dst, const double* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(dst + i),
                                                _mm256_loadu_pd(src + i)));
    for (; i < n; ++i) dst[i] = src[i] > dst[i] ? src[i] : dst[i];
}

void a_recip(double* dst, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_div_pd(one, _mm256_loadu_pd(dst + i)));
    for (; i < n; ++i) dst[i] = 1.0 / dst[i];
}

void a_mul(double* dst, const double* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(dst + i),
                                                _mm256_loadu_pd(src + i)));
    for (; i < n; ++i) dst[i] *= src[i];
}

void a_log1p_scale(double* dst, const double* e, double h, std::size_t n) {
    const __m256d hv = _mm256_set1_pd(h);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d u = _mm256_mul_pd(_mm256_loadu_pd(e + i), hv);
        __m256d w = _mm256_add_pd(one, u);
        __m256d wm1 = _mm256_sub_pd(w, one);
        // log1p(u) = log(w) * u / (w - 1) repairs the rounding of 1 + u;
        // when w == 1 the limit is u itself.
        __m256d exact = _mm256_cmp_pd(wm1, _mm256_setzero_pd(), _CMP_EQ_OQ);
        __m256d safe = _mm256_blendv_pd(wm1, one, exact);
        __m256d res = _mm256_mul_pd(vlog(w), _mm256_div_pd(u, safe));
        _mm256_storeu_pd(dst + i, _mm256_blendv_pd(res, u, exact));
    }
    for (; i < n; ++i) dst[i] = std::log1p(e[i] * h);
}

void a_exp_sub_store_add(double* lp, const double* m, double* acc, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = vexp(_mm256_sub_pd(_mm256_loadu_pd(lp + i),
                                       _mm256_loadu_pd(m + i)));
        _mm256_storeu_pd(lp + i, v);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), v));
    }
    for (; i < n; ++i) {
        lp[i] = std::exp(lp[i] - m[i]);
        acc[i] += lp[i];
    }
}

void a_nb_logpmf(double* lp, const std::int32_t* idx, const double* tab,
                 const double* c0, const double* cnt, const double* l1p,
                 double A, double B, double r, std::size_t n) {
    const __m256d Av = _mm256_set1_pd(A);
    const __m256d Bv = _mm256_set1_pd(B);
    const __m256d rv = _mm256_set1_pd(r);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m128i ix = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
        __m256d t = _mm256_i32gather_pd(tab, ix, 8);
        __m256d cv = _mm256_loadu_pd(cnt + i);
        __m256d base = _mm256_add_pd(_mm256_add_pd(Av, t), _mm256_loadu_pd(c0 + i));
        base = _mm256_fmadd_pd(cv, Bv, base);
        __m256d res = _mm256_fnmadd_pd(_mm256_add_pd(rv, cv),
                                       _mm256_loadu_pd(l1p + i), base);
        _mm256_storeu_pd(lp + i, res);
    }
    for (; i < n; ++i)
        lp[i] = A + tab[idx[i]] + c0[i] + cnt[i] * B - (r + cnt[i]) * l1p[i];
}

constexpr Ops kAvx2 = {
    "avx2",      a_sum,   a_dot,   a_dot_gather, a_sum_add_log,
    a_fp_denom,  a_axpy,  a_vmax,  a_recip,      a_mul,
    a_log1p_scale, a_exp_sub_store_add, a_nb_logpmf,
};

}  // namespace

const Ops& avx2_ops() { return kAvx2; }

}  // namespace ebsig::kern
