#include "hybridcast/numcore.hpp"

#include <numbers>

namespace hybridcast {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - uniform() lies in (0, 1], keeping the log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ParameterError("Rng::below: empty range");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

VectorXd rng_normal(Rng& rng, Index n, double mean, double sd) {
    if (!(sd >= 0.0)) throw ParameterError("rng_normal: sd must be non-negative");
    if (n < 0) throw ParameterError("rng_normal: negative count");
    VectorXd out(n);
    for (Index i = 0; i < n; ++i) out[i] = mean + sd * rng.normal();
    return out;
}

}  // namespace hybridcast
