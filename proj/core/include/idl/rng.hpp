#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace idl {

/// Deterministic stream splitting: a single user seed fans out into
/// independent generators identified by name, so adding a new consumer
/// never shifts the draws of an existing one.
std::mt19937_64 make_rng(std::uint64_t seed, std::string_view stream);

}  // namespace idl
