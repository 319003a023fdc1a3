// SPDX-License-Identifier: Apache-2.0
#include "styledraw/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace styledraw {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0,1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::string Rng::serialize_state() const {
  std::ostringstream os;
  os << engine_;
  // The cached Box-Muller spare rides along as its raw bit pattern; printing
  // it as a decimal double would not round-trip exactly.
  if (has_spare_) os << " 1 " << std::bit_cast<std::uint64_t>(spare_);
  return os.str();
}

void Rng::restore_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (is.fail()) throw std::invalid_argument("rng: malformed state token");
  int flag = 0;
  if (is >> flag && flag == 1) {
    std::uint64_t bits = 0;
    if (!(is >> bits)) throw std::invalid_argument("rng: malformed state token");
    spare_ = std::bit_cast<double>(bits);
    has_spare_ = true;
  } else {
    has_spare_ = false;
  }
}

static std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(a) ^ b);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix64(mix_seed(a, b) ^ c);
}

}  // namespace styledraw
