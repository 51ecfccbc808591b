#include "skippy/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace skippy {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t mix_seed(uint64_t a, uint64_t b) { return mix64(a ^ mix64(b)); }

uint64_t episode_seed(uint64_t root_seed, uint64_t episode_index) {
  return mix_seed(root_seed, 0x5ca1ab1eULL + episode_index);
}

uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * M_PI * u2;
  spare_ = r * std::sin(th);
  has_spare_ = true;
  return r * std::cos(th);
}

int Rng::categorical(const Eigen::VectorXd& probs) {
  const double u = uniform();
  double acc = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Guard against rounding in the cumulative sum: return the last positive entry.
  for (int i = static_cast<int>(probs.size()) - 1; i >= 0; --i) {
    if (probs[i] > 0.0) return i;
  }
  throw std::invalid_argument("categorical: probability vector has no mass");
}

Eigen::VectorXd Rng::gaussian_vector(int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

Eigen::VectorXd Rng::unit_vector(int dim) {
  Eigen::VectorXd v = gaussian_vector(dim);
  const double n = v.norm();
  if (n < 1e-300) return Eigen::VectorXd::Unit(dim, 0);
  return v / n;
}

double stage_uniform(uint64_t ep_seed, int stage, uint32_t purpose) {
  uint64_t s = mix_seed(ep_seed, (static_cast<uint64_t>(stage) << 32) | purpose);
  return static_cast<double>(mix64(s) >> 11) * 0x1.0p-53;
}

}  // namespace skippy
