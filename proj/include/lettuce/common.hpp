#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>

namespace lettuce {

using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>;

/// Random engine used everywhere a seed appears in a public signature.
using Rng = std::mt19937_64;

/// Mixes a root seed and a stream index into an independent child seed
/// (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// Same, keyed by a label ("train", "forecast", ...).
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// "%.17g": every CSV artifact carries 17 significant digits.
std::string format_double(double value);

/// Worker count: LETTUCE_BNODE_THREADS caps hardware concurrency, and
/// force_serial() pins it to one.
std::size_t worker_count();
void force_serial(bool serial);

/// Runs body(i) for i in [0, n). Each index is processed exactly once; with
/// one worker this is a plain loop. Exceptions from the lowest failing index
/// are rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lettuce
