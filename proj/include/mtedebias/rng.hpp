#pragma once

#include <cstdint>
#include <random>

namespace mte::num {

// splitmix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Seed for replication / stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Explicitly seeded generator. Uniforms and normals are built from raw
// mt19937_64 output (normals by inversion) so draws are identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Uniform on the open interval (0,1), 53-bit resolution.
  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace mte::num
