#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedlc {

using Rng = std::mt19937_64;

// Purposes of the named random streams. Every random draw in the simulator
// comes from a stream keyed by (seed, purpose, indices...), so the order in
// which clients, classes or seeds are processed never changes the output.
enum class Stream : std::uint64_t {
    synthetic_client = 1,
    synthetic_split = 2,
    quantity_shards = 3,
    dirichlet_class = 4,
    dirichlet_shuffle = 5,
    model_init = 6,
    batch_shuffle = 7,
    client_sampling = 8,
    probe_trial = 9,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

std::uint64_t derive_seed(std::uint64_t seed, Stream purpose,
                          std::initializer_list<std::uint64_t> keys = {}) noexcept;

Rng make_rng(std::uint64_t seed, Stream purpose,
             std::initializer_list<std::uint64_t> keys = {});

}  // namespace fedlc
