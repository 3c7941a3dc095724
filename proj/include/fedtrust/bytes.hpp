#pragma once

// Byte-string helpers shared by every module: hex, standard (padded) base64,
// and base58 with the Bitcoin alphabet.

#include <sodium.h>

#include <array>
#include <cstring>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace fedtrust {

using Bytes = std::vector<unsigned char>;
using Hash32 = std::array<unsigned char, 32>;

namespace detail {
inline void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error("libsodium failed to initialise");
}
}  // namespace detail

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(const Bytes& b) {
  return std::string(b.begin(), b.end());
}

inline std::string to_hex(const unsigned char* data, std::size_t len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out += digits[data[i] >> 4];
    out += digits[data[i] & 0x0f];
  }
  return out;
}

inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }
inline std::string to_hex(const Hash32& h) { return to_hex(h.data(), h.size()); }

inline Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw EncodingError("hex string has odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw EncodingError("invalid hex digit");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<unsigned char>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

// Standard base64 with padding kept.
inline std::string base64_encode(const unsigned char* data, std::size_t len) {
  std::string out(sodium_base64_ENCODED_LEN(len, sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), data, len, sodium_base64_VARIANT_ORIGINAL);
  out.resize(std::strlen(out.c_str()));
  return out;
}

inline std::string base64_encode(const Bytes& b) { return base64_encode(b.data(), b.size()); }

inline Bytes base64_decode(std::string_view b64) {
  Bytes out(b64.size() / 4 * 3 + 3);
  std::size_t out_len = 0;
  if (sodium_base642bin(out.data(), out.size(), b64.data(), b64.size(), nullptr,
                        &out_len, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0)
    throw EncodingError("invalid base64");
  out.resize(out_len);
  return out;
}

// Base58 (Bitcoin alphabet). Leading zero bytes encode as leading '1's.
inline std::string base58_encode(const unsigned char* data, std::size_t len) {
  static const char* alphabet =
      "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
  std::size_t zeros = 0;
  while (zeros < len && data[zeros] == 0) ++zeros;
  std::vector<unsigned char> digits;  // base-58 value, least significant first
  for (std::size_t i = zeros; i < len; ++i) {
    unsigned carry = data[i];
    for (auto& d : digits) {
      carry += static_cast<unsigned>(d) << 8;
      d = static_cast<unsigned char>(carry % 58);
      carry /= 58;
    }
    while (carry) {
      digits.push_back(static_cast<unsigned char>(carry % 58));
      carry /= 58;
    }
  }
  std::string out(zeros, '1');
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) out += alphabet[*it];
  return out;
}

inline std::string base58_encode(const Bytes& b) { return base58_encode(b.data(), b.size()); }

}  // namespace fedtrust
