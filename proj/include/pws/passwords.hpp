#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include "pws/error.hpp"

namespace pws {

// Number of distinct classes a workbook-element password can fall into.
inline constexpr std::uint32_t kElementKeyspace = 194560;

// Weak element password. Only the class is stored, so any password landing
// in the same class unlocks the element.
struct ElementPasswordRecord {
  std::uint32_t class_index = 0;
  bool operator==(const ElementPasswordRecord&) const = default;
};

inline constexpr int kOpenFileIterations = 1 << 17;
inline constexpr std::size_t kSaltBytes = 16;
inline constexpr std::size_t kDigestBytes = 32;

// Strong open-file password: PBKDF2-HMAC-SHA256 over the full text.
struct OpenFilePasswordRecord {
  std::array<std::uint8_t, kSaltBytes> salt{};
  std::array<std::uint8_t, kDigestBytes> digest{};
  bool operator==(const OpenFilePasswordRecord&) const = default;
};

using PasswordRecord = std::variant<ElementPasswordRecord, OpenFilePasswordRecord>;

// h = h*31 + byte over 32 bits, reduced into the keyspace. Stored in files,
// so this must never change.
inline std::uint32_t element_hash(std::string_view password) {
  std::uint32_t h = 0;
  for (unsigned char c : password) h = h * 31u + c;
  return h % kElementKeyspace;
}

inline ElementPasswordRecord make_element_record(std::string_view password) { return {element_hash(password)}; }

inline bool verify_element(const ElementPasswordRecord& record, std::string_view password) {
  return element_hash(password) == record.class_index;
}

namespace detail {

inline std::array<std::uint8_t, kDigestBytes> open_file_digest(std::span<const std::uint8_t> salt,
                                                               std::string_view password) {
  std::array<std::uint8_t, kDigestBytes> out{};
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                        static_cast<int>(salt.size()), kOpenFileIterations, EVP_sha256(),
                        static_cast<int>(out.size()), out.data()) != 1)
    throw std::runtime_error("PBKDF2 failed");
  return out;
}

}  // namespace detail

inline void secure_random_bytes(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) throw std::runtime_error("RAND_bytes failed");
}

inline OpenFilePasswordRecord make_open_file_record(std::string_view password) {
  OpenFilePasswordRecord rec;
  secure_random_bytes(rec.salt);
  rec.digest = detail::open_file_digest(rec.salt, password);
  return rec;
}

// Constant-time comparison of the derived digest. There is deliberately no
// other way to test an open-file password.
inline bool verify_open_file(const OpenFilePasswordRecord& record, std::string_view password) {
  auto candidate = detail::open_file_digest(record.salt, password);
  return CRYPTO_memcmp(candidate.data(), record.digest.data(), kDigestBytes) == 0;
}

// Canonical preimage for one class: the decimal class index, followed (unless
// it already hashes to its own class) by a seven character suffix over the
// 31 symbols '0'..'N'. Seven base-31 digits span more than 2^32, so the suffix
// can steer the 32-bit fold to exactly `class_index`.
inline std::string canonical_candidate(std::uint32_t class_index) {
  std::string prefix = std::to_string(class_index);
  if (element_hash(prefix) == class_index) return prefix;

  constexpr int kSuffix = 7;
  constexpr std::uint32_t kBase = 31;
  constexpr unsigned char kFirst = '0';

  std::uint32_t h = 0;
  for (unsigned char c : prefix) h = h * kBase + c;
  std::uint32_t scale = 1;   // 31^7 mod 2^32
  std::uint32_t offset = 0;  // '0' * (31^6 + ... + 1) mod 2^32
  for (int i = 0; i < kSuffix; ++i) {
    offset += kFirst * scale;
    scale *= kBase;
  }
  // Want h*31^7 + offset + sum(d_i * 31^(6-i)) == class_index (mod 2^32).
  std::uint64_t need = static_cast<std::uint32_t>(class_index - h * scale - offset);
  std::string suffix(kSuffix, '0');
  for (int i = kSuffix - 1; i >= 0; --i) {
    suffix[i] = static_cast<char>(kFirst + need % kBase);
    need /= kBase;
  }
  return prefix + suffix;
}

struct CrackResult {
  std::string password;
  std::uint64_t attempts = 0;
};

// Walks the canonical candidates in class order until one verifies. Each
// class has exactly one candidate, so this needs at most kElementKeyspace
// attempts and always succeeds.
inline CrackResult crack_element(const ElementPasswordRecord& record) {
  CrackResult result;
  for (std::uint32_t c = 0; c < kElementKeyspace; ++c) {
    auto candidate = canonical_candidate(c);
    ++result.attempts;
    if (verify_element(record, candidate)) {
      result.password = std::move(candidate);
      return result;
    }
  }
  throw std::logic_error("canonical candidates do not cover the keyspace");
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0xf];
  }
  return out;
}

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> from_hex(std::string_view text) {
  if (text.size() != 2 * N) return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::array<std::uint8_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    int hi = nibble(text[2 * i]);
    int lo = nibble(text[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return out;
}

}  // namespace pws
