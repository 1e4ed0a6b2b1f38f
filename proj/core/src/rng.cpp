#include "djs/rng.hpp"

#include <cmath>
#include <numbers>

namespace djs {
namespace {

constexpr std::uint32_t kMult0 = 0xD2511F53u;
constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<std::uint32_t, 4>& ctr,
                         const std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMult0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMult1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_block(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    philox_round(counter, key);
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return counter;
}

GaussianStream::GaussianStream(std::uint64_t seed, std::uint64_t replica,
                               std::uint32_t layer, StreamRole role)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_lo_(static_cast<std::uint32_t>(replica)),
      stream_hi_((layer << 8) | static_cast<std::uint32_t>(role)) {}

std::array<std::uint32_t, 2> GaussianStream::uniform_pair() {
  const std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
      stream_lo_, stream_hi_};
  ++block_;
  const auto out = philox4x32_block(ctr, key_);
  return {out[0] ^ out[2], out[1] ^ out[3]};
}

double GaussianStream::next_uniform() {
  const auto pair = uniform_pair();
  const std::uint64_t bits =
      (static_cast<std::uint64_t>(pair[1]) << 32) | pair[0];
  // 53 significant bits, offset by half an ulp so the value is in (0,1).
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double GaussianStream::next() {
  if (has_pending_) {
    has_pending_ = false;
    return pending_;
  }
  const auto a = uniform_pair();
  const auto b = uniform_pair();
  const std::uint64_t bits1 =
      (static_cast<std::uint64_t>(a[1]) << 32) | a[0];
  const std::uint64_t bits2 =
      (static_cast<std::uint64_t>(b[1]) << 32) | b[0];
  const double u1 = (static_cast<double>(bits1 >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = (static_cast<double>(bits2 >> 11) + 0.5) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  pending_ = r * std::sin(t);
  has_pending_ = true;
  return r * std::cos(t);
}

void GaussianStream::fill(double* dst, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) dst[i] = next();
}

}  // namespace djs
