#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace asfl {

// Seeds for the four independent random streams. Draws derived from one seed
// never depend on the others, so e.g. changing the data seed leaves the
// channel realizations bit-identical.
struct SeedPack {
  std::uint64_t env = 1;       // positions, CPU freqs, fading, packet outcomes, baseline draws
  std::uint64_t data = 2;      // dataset synthesis, partition, batch selection
  std::uint64_t model = 3;     // weight initialization
  std::uint64_t sampling = 4;  // discrepancy probe index draws
};

// FNV-1a, used to fold purpose tags into the stream key.
inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Derived-stream scheme: every random decision is drawn from a generator
// keyed by (seed, purpose tag, a, b), where a/b are usually (round, client).
// Each (tag, a, b) combination gets its own mt19937_64, so draws for one
// purpose never shift the draws for another and any round can be replayed
// in isolation.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view tag,
                                   std::uint64_t a = 0, std::uint64_t b = 0) {
  const std::uint64_t t = hash_tag(tag);
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(t),    static_cast<std::uint32_t>(t >> 32),
      static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
      static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace asfl
