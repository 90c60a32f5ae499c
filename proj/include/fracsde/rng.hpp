#pragma once

// Deterministic counter-derived random streams.
//
// Every stream is keyed by (master_seed, path_index, stream tag) through a
// splitmix64 chain, so realizations for different paths or purposes never
// overlap and can be generated in any order, on any thread count, with
// bit-identical results. Normal variates use a hand-rolled Box-Muller
// transform: std::normal_distribution's algorithm is implementation-defined,
// which would silently break the byte-identical output contract across
// toolchains.

#include <cmath>
#include <cstdint>

namespace fracsde {

namespace rng_detail {

inline std::uint64_t splitmix64_mix(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace rng_detail

// Distinct sub-streams of one path's randomness.
enum class StreamTag : std::uint64_t {
    wiener = 1,
    jump_times = 2,
    jump_marks = 3,
    scratch = 4,  // sampling-based checks (contractor verification etc.)
};

class CounterRng {
  public:
    CounterRng(std::uint64_t master_seed, std::uint64_t path_index, StreamTag tag)
        : state_(derive(master_seed, path_index, static_cast<std::uint64_t>(tag))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return rng_detail::splitmix64_mix(state_);
    }

    // Uniform on the open interval (0,1); never returns an exact endpoint,
    // so logs in Box-Muller and exponential sampling stay finite.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    double next_exponential(double rate) { return -std::log(next_uniform()) / rate; }

  private:
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t path, std::uint64_t tag) {
        std::uint64_t s = rng_detail::splitmix64_mix(seed + 0x9e3779b97f4a7c15ULL);
        s = rng_detail::splitmix64_mix(s ^ (path + 0xd1b54a32d192ed03ULL));
        s = rng_detail::splitmix64_mix(s ^ (tag + 0x8cb92ba72f3d8dd7ULL));
        return s;
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fracsde
