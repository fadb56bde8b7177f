#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pbls/matrix.hpp"

namespace pbls {

enum class ScaleMode : std::uint8_t {
    Paper,  // scales uniform on {1..n}
    Pow2,   // scales uniform on {1,2,4,...,2^ceil(log2 n)}; exact to divide by
};

ScaleMode parse_scale_mode(const std::string& s);
std::string to_string(ScaleMode mode);

/// The client's masking keys. Reproducible: the same (seed, m, n, mode)
/// always yields the same keys. The generator is a seeded PRNG, not a CSPRNG;
/// the scheme's hiding argument is combinatorial (key-space counting), not
/// cryptographic.
struct MaskKeys {
    SignedPermutation p;   // size m, masks rows
    ScaledPermutation q;   // size n, masks columns
    std::uint64_t seed = 0;
    ScaleMode scale_mode = ScaleMode::Pow2;
};

MaskKeys generate_keys(std::size_t m, std::size_t n, std::uint64_t seed,
                       ScaleMode mode = ScaleMode::Pow2);

/// Debug export of key material (insecure by design). Layout: magic
/// "PBLSKEY1", then m, n as u64 LE, pi1 (m u64), omega (m i64), pi2 (n u64),
/// a (n i64), all little-endian.
std::vector<std::uint8_t> serialize_keys(const MaskKeys& keys);
MaskKeys deserialize_keys(std::span<const std::uint8_t> bytes);

/// Empirical key-space census for tiny sizes. Samples `samples` signed
/// permutations of the given size (or scaled permutations in paper mode) and
/// tallies them against the full enumerated key space.
struct CensusResult {
    std::size_t keyspace_size = 0;
    std::vector<std::uint64_t> counts;  // one bucket per enumerated key
    double chi_square = 0.0;
    double p_value = 0.0;
};

CensusResult key_space_census(std::size_t size, std::uint64_t samples, std::uint64_t seed,
                              bool scaled = false);

}  // namespace pbls
