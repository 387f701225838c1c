#include "fairvar/rng.hpp"

#include <cmath>
#include <utility>

namespace fairvar {

double Prng::gaussian() noexcept
{
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

void shuffle(std::span<std::size_t> items, Prng& rng) noexcept
{
    for (std::size_t i = items.size(); i-- > 1;) {
        const auto j = static_cast<std::size_t>(rng.bounded(i + 1));
        std::swap(items[i], items[j]);
    }
}

}  // namespace fairvar
