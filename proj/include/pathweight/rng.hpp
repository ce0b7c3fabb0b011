#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace pathweight {

// Counter-based RNG: Philox4x32-10 (Salmon et al.). Every output word is a
// pure function of (key, counter), so draws can be indexed rather than
// streamed. This is what makes the Monte Carlo results independent of worker
// count and iteration order.
namespace philox {

struct Block {
    std::uint32_t w[4];
};

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline Block philox4x32_10(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                           std::uint32_t c3, std::uint32_t k0, std::uint32_t k1) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c0, hi0, lo0);
        mulhilo(kMul1, c2, hi1, lo1);
        const std::uint32_t n0 = hi1 ^ c1 ^ k0;
        const std::uint32_t n1 = lo1;
        const std::uint32_t n2 = hi0 ^ c3 ^ k1;
        const std::uint32_t n3 = lo0;
        c0 = n0;
        c1 = n1;
        c2 = n2;
        c3 = n3;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return Block{{c0, c1, c2, c3}};
}

}  // namespace philox

// Uniform in the open interval (0,1) from 64 bits; never returns 0 or 1, so
// it is safe to feed through the normal quantile.
inline double uniform_open01(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Normal quantile, Wichura's AS 241 (PPND16). Accurate to ~1e-16 relative
// over the full open interval.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        value = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        value = num / den;
    }
    return (q < 0.0) ? -value : value;
}

// Experiment tags keep, e.g., the appendix checks out of the campaign stream.
enum class StreamTag : std::uint32_t {
    kIncrements = 0,
    kEdb2 = 1,
    kGaussTail = 2,
    kItoTrace = 3,
    kHpeMass = 4,
    kTest = 5,
};

// One standard normal indexed by (seed, sample, increment, coordinate).
inline double keyed_normal(std::uint64_t seed, std::uint64_t sample, std::uint32_t increment,
                           std::uint32_t coordinate, StreamTag tag = StreamTag::kIncrements) {
    const std::uint32_t k0 = static_cast<std::uint32_t>(seed);
    const std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
    const std::uint32_t c0 = static_cast<std::uint32_t>(sample);
    const std::uint32_t c1 = static_cast<std::uint32_t>(sample >> 32) ^
                             (static_cast<std::uint32_t>(tag) << 24);
    const std::uint32_t c2 = increment;
    // Each Philox block yields 128 bits = two 64-bit uniforms, so coordinates
    // are packed two per block.
    const std::uint32_t c3 = coordinate >> 1;
    const philox::Block b = philox::philox4x32_10(c0, c1, c2, c3, k0, k1);
    const int lane = static_cast<int>(coordinate & 1u) * 2;
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(b.w[lane]) << 32) | b.w[lane + 1];
    return normal_quantile(uniform_open01(bits));
}

inline constexpr const char* kRngKind = "philox4x32-10+inverse-cdf";

}  // namespace pathweight
