#pragma once

#include <cstdint>
#include <Eigen/Dense>

namespace skippy {

// Counter-free splitmix64 stream. Small state, platform-stable output,
// cheap to fork into independent streams by seed mixing.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  double uniform();                // [0, 1)
  double normal();                 // standard Gaussian, Box-Muller
  int categorical(const Eigen::VectorXd& probs);
  Eigen::VectorXd unit_vector(int dim);
  Eigen::VectorXd gaussian_vector(int dim);

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

uint64_t mix64(uint64_t x);
uint64_t mix_seed(uint64_t a, uint64_t b);

// Splitting rule for parallel-safe episode streams: root seed + episode index.
uint64_t episode_seed(uint64_t root_seed, uint64_t episode_index);

// Per-(episode, stage, purpose) uniform draw. Trajectory generators key all
// randomness this way so that two policies agreeing on a prefix of actions
// produce bitwise-identical prefixes under a shared episode seed.
double stage_uniform(uint64_t ep_seed, int stage, uint32_t purpose);

inline constexpr uint32_t kDrawAction = 1;
inline constexpr uint32_t kDrawTransition = 2;
inline constexpr uint32_t kDrawReward = 3;
inline constexpr uint32_t kDrawSkip = 4;

}  // namespace skippy
