#pragma once
// Counter-based random number generation. Every random quantity in a run is
// addressed by (seed, replica, layer, role), so results do not depend on
// evaluation order, thread count, or how much of a stream other code
// consumed. The generator is Philox4x32-10.

#include <array>
#include <cstddef>
#include <cstdint>

namespace djs {

enum class StreamRole : std::uint32_t {
  weights = 0,  // entries of a layer weight matrix
  biases = 1,   // entries of a layer bias vector
  gamma = 2,    // fresh standard normals for the surrogate diagonal
  input = 3,    // entries of the input vector (layer index 0)
};

// One 128-bit block of the Philox4x32 generator with 10 rounds.
std::array<std::uint32_t, 4> philox4x32_block(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key);

// Stream of i.i.d. variates addressed by (seed, replica, layer, role).
// Each 128-bit block yields two doubles; gaussians come from Box-Muller.
class GaussianStream {
 public:
  GaussianStream(std::uint64_t seed, std::uint64_t replica, std::uint32_t layer,
                 StreamRole role);

  double next();                                    // standard normal
  double next_uniform();                            // uniform on (0,1)
  void fill(double* dst, std::size_t count);        // standard normals

 private:
  std::array<std::uint32_t, 2> uniform_pair();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_lo_ = 0;
  std::uint32_t stream_hi_ = 0;
  std::uint64_t block_ = 0;
  double pending_ = 0.0;
  bool has_pending_ = false;
};

}  // namespace djs
