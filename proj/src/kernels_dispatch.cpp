#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ebsig/kernels.hpp"

namespace ebsig::kern {

#ifndef EBSIG_HAVE_AVX2
const Ops& avx2_ops() { return scalar_ops(); }
#endif

bool avx2_available() {
#ifdef EBSIG_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops& active() {
    static const Ops* chosen = [] {
        if (const char* env = std::getenv("EBSIG_KERNELS")) {
            const std::string want(env);
            if (want == "scalar") return &scalar_ops();
            if (want == "avx2") {
                if (!avx2_available())
                    throw std::runtime_error(
                        "EBSIG_KERNELS=avx2 requested but AVX2+FMA is unavailable");
                return &avx2_ops();
            }
            if (!want.empty())
                throw std::runtime_error("unknown EBSIG_KERNELS value: " + want);
        }
        return avx2_available() ? &avx2_ops() : &scalar_ops();
    }();
    return *chosen;
}

}  // namespace ebsig::kern
