#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace evorep {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent child seed from a parent seed and a path of labels.
/// The same (parent, labels...) always yields the same child.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) noexcept;

/// Stable 64-bit FNV-1a hash, used to turn stream names into seed labels.
std::uint64_t hash_label(std::string_view label) noexcept;

/// Uniformly random permutation of 0..n-1 (Fisher-Yates).
std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng);

/// Assigns each of n samples to one of k folds of near-equal size, randomly.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed);

}  // namespace evorep
