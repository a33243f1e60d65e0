#include "stormpg/rng.hpp"

#include "stormpg/common.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>

namespace stormpg {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t RngStream::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t RngStream::derive_key(std::uint64_t master, std::uint64_t index) {
  return mix(mix(master) ^ mix(index + kGolden));
}

RngStream RngStream::derive(std::uint64_t master, std::uint64_t index) {
  return RngStream(derive_key(master, index));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ParamsId params_id(const ParamVector& params) {
  // FNV-1a over the raw bytes, finalized with the stream mixer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    std::uint64_t bits;
    const double v = params[i] == 0.0 ? 0.0 : params[i];  // -0 == +0
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  h ^= static_cast<std::uint64_t>(params.size());
  return RngStream::mix(h);
}

std::string format_params_id(ParamsId id) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id));
  return buf;
}

bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return v.allFinite();
}

}  // namespace stormpg
