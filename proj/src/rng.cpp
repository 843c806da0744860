#include "fedlc/rng.hpp"

namespace fedlc {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Stream purpose,
                          std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    for (auto k : keys) h = splitmix64(h ^ k);
    return h;
}

Rng make_rng(std::uint64_t seed, Stream purpose,
             std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(seed, purpose, keys));
}

}  // namespace fedlc
