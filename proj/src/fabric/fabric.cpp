// SPDX-License-Identifier: Apache-2.0
#include "pgaslab/fabric/fabric.hpp"

#include <array>
#include <cstring>

#include "pgaslab/error.hpp"

namespace pgaslab::fabric {

std::string to_string(const GlobalAddress& a) {
  return "r" + std::to_string(a.rank) + "+" + std::to_string(a.offset) + "/" + std::to_string(a.width);
}

std::uint64_t apply_fao(FaoOp op, std::uint64_t old, std::uint64_t operand, std::uint32_t width) noexcept {
  std::uint64_t v = 0;
  switch (op) {
    case FaoOp::add: v = old + operand; break;
    case FaoOp::bit_and: v = old & operand; break;
    case FaoOp::bit_or: v = old | operand; break;
    case FaoOp::bit_xor: v = old ^ operand; break;
  }
  return width == 4 ? (v & 0xFFFF'FFFFULL) : v;
}

Task<CasPersistentResult> Fabric::cas_persistent(Rank self, GlobalAddress addr, std::uint64_t expected,
                                                 std::uint64_t desired, std::optional<std::uint64_t> max_attempts) {
  CasPersistentResult result;
  for (;;) {
    if (max_attempts && result.attempts >= *max_attempts) {
      throw LivelockError("cas_persistent on " + to_string(addr) + " exceeded " + std::to_string(*max_attempts) +
                          " attempts");
    }
    ++result.attempts;
    const std::uint64_t seen = co_await cas(self, addr, expected, desired);
    if (seen == expected) co_return result;
    co_await backoff(self, Duration{0});
  }
}

std::uint64_t Fabric::allocate(std::size_t bytes, std::size_t alignment) {
  if (alignment == 0 || (alignment & (alignment - 1)) != 0) throw ArgumentError("allocate: alignment must be a power of two");
  const std::uint64_t offset = (next_offset_ + alignment - 1) & ~static_cast<std::uint64_t>(alignment - 1);
  if (offset + bytes > segment_bytes()) {
    throw AddressError("segment exhausted: need " + std::to_string(offset + bytes) + " bytes, segment has " +
                       std::to_string(segment_bytes()));
  }
  next_offset_ = offset + bytes;
  return offset;
}

std::uint64_t Fabric::local_load(Rank owner, std::uint64_t offset, std::uint32_t width) const {
  std::array<std::byte, 8> buf{};
  local_read(owner, offset, std::span(buf).first(width));
  std::uint64_t v = 0;
  for (std::uint32_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void Fabric::local_store(Rank owner, std::uint64_t offset, std::uint64_t value, std::uint32_t width) {
  std::array<std::byte, 8> buf{};
  for (std::uint32_t i = 0; i < width; ++i) buf[i] = static_cast<std::byte>(value >> (8 * i));
  local_write(owner, offset, std::span<const std::byte>(buf).first(width));
}

void Fabric::check_rank(Rank r) const {
  if (r < 0 || r >= size()) throw AddressError("rank " + std::to_string(r) + " outside [0, " + std::to_string(size()) + ")");
}

void Fabric::check_range(const GlobalAddress& a, std::size_t length) const {
  check_rank(a.rank);
  if (a.offset > segment_bytes() || length > segment_bytes() - a.offset) {
    throw AddressError("range " + to_string(a) + " len " + std::to_string(length) + " outside segment of " +
                       std::to_string(segment_bytes()) + " bytes");
  }
}

void Fabric::check_atomic(const GlobalAddress& a) const {
  if (a.width != 4 && a.width != 8) throw AddressError("atomic width must be 4 or 8: " + to_string(a));
  if (a.offset % a.width != 0) throw AddressError("misaligned atomic: " + to_string(a));
  check_range(a, a.width);
}

}  // namespace pgaslab::fabric
