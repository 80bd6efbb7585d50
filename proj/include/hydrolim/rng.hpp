#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace hydrolim {

// Counter-based RNG (Philox4x32-10). Draws are a pure function of
// (seed, unit, step, block), so ensembles give bit-identical results for any
// thread count and any particle visiting order.
namespace rng {

namespace detail {

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace detail

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo(M0, ctr[0], hi0, lo0);
    detail::mulhilo(M1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

// Stream of standard normals for one (seed, unit, step) cell. `unit` is a
// particle index or any other substream id; `step` separates time steps.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t unit, std::uint64_t step)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        base_{static_cast<std::uint32_t>(unit),
              static_cast<std::uint32_t>(unit >> 32),
              static_cast<std::uint32_t>(step), 0u} {}

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    auto w = philox4x32({base_[0], base_[1], base_[2], block_++}, key_);
    const double u1 = to_unit_upper(w[0], w[1]);  // in (0,1], safe for log
    const double u2 = to_unit_lower(w[2], w[3]);  // in [0,1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double uniform() {
    auto w = philox4x32({base_[0], base_[1], base_[2], block_++}, key_);
    return to_unit_lower(w[0], w[1]);
  }

 private:
  static double to_unit_upper(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t x = (static_cast<std::uint64_t>(a) << 32) | b;
    return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
  }
  static double to_unit_lower(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t x = (static_cast<std::uint64_t>(a) << 32) | b;
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> base_;
  std::uint32_t block_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace rng
}  // namespace hydrolim
