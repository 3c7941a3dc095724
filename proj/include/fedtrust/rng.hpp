#pragma once

// Deterministic random source. Every piece of randomness in the project —
// key seeds, nonces, message ids, blinding factors, synthetic data, shuffles —
// is drawn from a DetRng seeded (directly or by derivation) from the scenario
// seed, so a run replays exactly. Gaussians are hand-rolled Box-Muller because
// std::normal_distribution's sequence is implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "bytes.hpp"

namespace fedtrust {

class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // index in [0, bound); bound > 0. Modulo bias is irrelevant at these sizes
  // and keeps the draw count per call fixed (one), which matters for replay.
  std::size_t index(std::size_t bound) { return static_cast<std::size_t>(eng_() % bound); }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;          // [0,1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  void fill(unsigned char* out, std::size_t len) {
    std::size_t i = 0;
    while (i < len) {
      std::uint64_t v = eng_();
      for (int b = 0; b < 8 && i < len; ++b, ++i) {
        out[i] = static_cast<unsigned char>(v & 0xff);
        v >>= 8;
      }
    }
  }

  Bytes bytes(std::size_t len) {
    Bytes out(len);
    fill(out.data(), len);
    return out;
  }

  std::string hex(std::size_t n_bytes) {
    Bytes b = bytes(n_bytes);
    return to_hex(b);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable child-seed derivation: SHA-256 over the little-endian root seed and a
// textual label, truncated to 64 bits. Distinct labels give independent
// streams; the mapping never changes between runs.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  detail::ensure_sodium();
  Bytes input(8);
  for (int i = 0; i < 8; ++i) input[i] = static_cast<unsigned char>((root >> (8 * i)) & 0xff);
  input.insert(input.end(), label.begin(), label.end());
  unsigned char h[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(h, input.data(), input.size());
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= static_cast<std::uint64_t>(h[i]) << (8 * i);
  return out;
}

}  // namespace fedtrust
