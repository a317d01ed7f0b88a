// SPDX-License-Identifier: Apache-2.0
#include "fmala/rng.hpp"

#include <cmath>

namespace fmala {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, StreamId id) : seed_(seed), id_(id) {
  std::uint64_t key = mix64(seed + kGolden);
  key = mix64(key ^ (id.chain * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
  key = mix64(key ^ (static_cast<std::uint64_t>(id.purpose) * 0xaef17502108ef2d9ULL));
  state_ = key;
}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::uniform() {
  // 53 random bits, offset by half an ulp so 0 and 1 are never produced.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

Eigen::VectorXd RngStream::normal_vector(Eigen::Index n) {
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
  return out;
}

}  // namespace fmala
