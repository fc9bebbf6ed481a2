#pragma once
// Counter-based random streams. Every shot owns an independent stream derived
// from (run seed, stream id, shot index), so shot i is reproducible no matter
// how many shots run or in what order workers pick them up.

#include <cstdint>

namespace kernelde::rng {

// splitmix64 finalizer; good avalanche, used both for hashing keys together
// and as the generator step.
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Stream {
public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform()
    {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

// Derive the key for one (stream, shot) pair. Chained mixing keeps nearby
// seeds / ids / shot indices decorrelated.
inline Stream shot_stream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t shot)
{
    std::uint64_t k = mix64(seed ^ 0x8f5c1e6ad2b94873ULL);
    k = mix64(k ^ mix64(stream_id));
    k = mix64(k ^ mix64(shot));
    return Stream(k);
}

}  // namespace kernelde::rng
