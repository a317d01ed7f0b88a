// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>

#include <Eigen/Core>

namespace fmala {

enum class StreamPurpose : std::uint32_t { kTangent = 1, kNoise = 2, kAccept = 3, kInit = 4, kData = 5 };

struct StreamId {
  std::uint64_t chain = 0;
  StreamPurpose purpose = StreamPurpose::kTangent;
};

/// Reproducible random stream keyed by (run seed, chain index, purpose).
///
/// SplitMix64 over a key-derived starting state: the output sequence depends
/// only on the key, so identical keys give identical draws on every platform
/// and distinct keys never share state. Distributions are computed here, not
/// through <random>, because the standard distributions are not portable.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, StreamId id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Marsaglia polar method).
  double normal();
  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::uint64_t seed() const { return seed_; }
  const StreamId& id() const { return id_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  StreamId id_;
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// The streams one chain owns.
struct ChainStreams {
  RngStream tangent;
  RngStream noise;
  RngStream accept;
  RngStream init;

  ChainStreams(std::uint64_t seed, std::uint64_t chain)
      : tangent(seed, {chain, StreamPurpose::kTangent}),
        noise(seed, {chain, StreamPurpose::kNoise}),
        accept(seed, {chain, StreamPurpose::kAccept}),
        init(seed, {chain, StreamPurpose::kInit}) {}
};

}  // namespace fmala
