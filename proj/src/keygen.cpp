#include "pbls/keygen.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cstring>
#include <map>
#include <random>

namespace pbls {

namespace {

// Draw uniformly from [0, bound) by rejection, independent of the standard
// library's distribution internals so key streams are stable.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

std::vector<std::size_t> random_permutation(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i-- > 1;) {  // Fisher-Yates
        std::size_t j = static_cast<std::size_t>(uniform_below(rng, i + 1));
        std::swap(p[i], p[j]);
    }
    return p;
}

SignedPermutation random_signed(std::mt19937_64& rng, std::size_t m) {
    SignedPermutation p;
    p.perm = random_permutation(rng, m);
    p.signs.resize(m);
    for (std::size_t i = 0; i < m; ++i) p.signs[i] = (rng() & 1) ? 1 : -1;
    return p;
}

ScaledPermutation random_scaled(std::mt19937_64& rng, std::size_t n, ScaleMode mode) {
    ScaledPermutation q;
    q.perm = random_permutation(rng, n);
    q.scales.resize(n);
    if (mode == ScaleMode::Paper) {
        for (std::size_t i = 0; i < n; ++i)
            q.scales[i] = static_cast<std::int64_t>(uniform_below(rng, n)) + 1;
    } else {
        std::size_t levels = 1;  // exponents 0..ceil(log2 n)
        while ((std::size_t{1} << (levels - 1)) < n) ++levels;
        for (std::size_t i = 0; i < n; ++i)
            q.scales[i] = std::int64_t{1} << uniform_below(rng, levels);
    }
    return q;
}

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

ScaleMode parse_scale_mode(const std::string& s) {
    if (s == "paper") return ScaleMode::Paper;
    if (s == "pow2") return ScaleMode::Pow2;
    throw InvalidArgument("unknown scale mode: " + s);
}

std::string to_string(ScaleMode mode) {
    return mode == ScaleMode::Paper ? "paper" : "pow2";
}

MaskKeys generate_keys(std::size_t m, std::size_t n, std::uint64_t seed, ScaleMode mode) {
    if (m == 0 || n == 0) throw InvalidArgument("generate_keys: dimensions must be positive");
    std::mt19937_64 rng(seed);
    MaskKeys keys;
    keys.p = random_signed(rng, m);
    keys.q = random_scaled(rng, n, mode);
    keys.seed = seed;
    keys.scale_mode = mode;
    keys.p.validate();
    keys.q.validate();
    return keys;
}

static constexpr char kKeyMagic[8] = {'P', 'B', 'L', 'S', 'K', 'E', 'Y', '1'};

std::vector<std::uint8_t> serialize_keys(const MaskKeys& keys) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kKeyMagic, kKeyMagic + 8);
    put_u64_le(out, keys.p.size());
    put_u64_le(out, keys.q.size());
    for (std::size_t v : keys.p.perm) put_u64_le(out, v);
    for (int s : keys.p.signs) put_u64_le(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(s)));
    for (std::size_t v : keys.q.perm) put_u64_le(out, v);
    for (std::int64_t s : keys.q.scales) put_u64_le(out, static_cast<std::uint64_t>(s));
    return out;
}

MaskKeys deserialize_keys(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kKeyMagic, 8) != 0)
        throw FormatError("key file: bad magic or truncated header");
    std::uint64_t m = get_u64_le(bytes.data() + 8);
    std::uint64_t n = get_u64_le(bytes.data() + 16);
    if (bytes.size() != 24 + 16 * m + 16 * n) throw FormatError("key file: length mismatch");
    const std::uint8_t* p = bytes.data() + 24;
    MaskKeys keys;
    keys.p.perm.resize(m);
    keys.p.signs.resize(m);
    keys.q.perm.resize(n);
    keys.q.scales.resize(n);
    for (std::uint64_t i = 0; i < m; ++i, p += 8) keys.p.perm[i] = get_u64_le(p);
    for (std::uint64_t i = 0; i < m; ++i, p += 8)
        keys.p.signs[i] = static_cast<int>(static_cast<std::int64_t>(get_u64_le(p)));
    for (std::uint64_t i = 0; i < n; ++i, p += 8) keys.q.perm[i] = get_u64_le(p);
    for (std::uint64_t i = 0; i < n; ++i, p += 8)
        keys.q.scales[i] = static_cast<std::int64_t>(get_u64_le(p));
    keys.p.validate();
    keys.q.validate();
    return keys;
}

CensusResult key_space_census(std::size_t size, std::uint64_t samples, std::uint64_t seed,
                              bool scaled) {
    if (size == 0 || size > 6) throw InvalidArgument("key_space_census: size must be in 1..6");
    if (samples == 0) throw InvalidArgument("key_space_census: need samples");

    // Rank a key as (permutation index, per-slot attribute index).
    std::size_t fact = 1;
    for (std::size_t i = 2; i <= size; ++i) fact *= i;
    const std::size_t per_slot = scaled ? size : 2;  // scale in {1..n} vs sign in {-1,+1}
    std::size_t attrs = 1;
    for (std::size_t i = 0; i < size; ++i) attrs *= per_slot;
    const std::size_t keyspace = fact * attrs;

    auto perm_rank = [&](const std::vector<std::size_t>& perm) {
        // Lehmer code
        std::size_t rank = 0;
        for (std::size_t i = 0; i < size; ++i) {
            std::size_t smaller = 0;
            for (std::size_t j = i + 1; j < size; ++j)
                if (perm[j] < perm[i]) ++smaller;
            rank = rank * (size - i) + smaller;
        }
        return rank;
    };

    CensusResult res;
    res.keyspace_size = keyspace;
    res.counts.assign(keyspace, 0);
    std::mt19937_64 rng(seed);
    for (std::uint64_t s = 0; s < samples; ++s) {
        std::size_t idx;
        if (scaled) {
            ScaledPermutation q = random_scaled(rng, size, ScaleMode::Paper);
            std::size_t a = 0;
            for (std::size_t i = 0; i < size; ++i)
                a = a * per_slot + static_cast<std::size_t>(q.scales[i] - 1);
            idx = perm_rank(q.perm) * attrs + a;
        } else {
            SignedPermutation p = random_signed(rng, size);
            std::size_t a = 0;
            for (std::size_t i = 0; i < size; ++i) a = a * 2 + (p.signs[i] > 0 ? 1 : 0);
            idx = perm_rank(p.perm) * attrs + a;
        }
        ++res.counts[idx];
    }

    const double expected = static_cast<double>(samples) / static_cast<double>(keyspace);
    double chi2 = 0.0;
    for (std::uint64_t c : res.counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    res.chi_square = chi2;
    boost::math::chi_squared dist(static_cast<double>(keyspace - 1));
    res.p_value = boost::math::cdf(boost::math::complement(dist, chi2));
    return res;
}

}  // namespace pbls
