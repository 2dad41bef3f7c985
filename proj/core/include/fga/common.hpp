#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fga {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad levels, missing columns, inconsistent fixtures.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A conditioning event with zero probability.
class UnsupportedConditioning : public Error {
 public:
  using Error::Error;
};

/// A stage triple that cannot be realized from data (non-monotone).
class UnsupportedStage : public Error {
 public:
  using Error::Error;
};

/// Nuisance fitting or estimation could not proceed.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Environment selector: the real world (s0) or the generative model (s1).
enum class Env : std::uint8_t { rw = 0, gm = 1 };

inline constexpr Env s0 = Env::rw;
inline constexpr Env s1 = Env::gm;

std::string_view to_string(Env e);
Env parse_env(std::string_view text);

/// Which environment supplies the {X,Z}, W and Y mechanism blocks.
struct StageTriple {
  Env z = s0;
  Env w = s0;
  Env y = s0;

  constexpr bool monotone() const {
    return static_cast<int>(z) <= static_cast<int>(w) &&
           static_cast<int>(w) <= static_cast<int>(y);
  }
  static constexpr StageTriple constant(Env e) { return {e, e, e}; }

  friend constexpr bool operator==(const StageTriple&, const StageTriple&) = default;
  friend constexpr auto operator<=>(const StageTriple& a, const StageTriple& b) {
    return a.code() <=> b.code();
  }
  constexpr int code() const {
    return static_cast<int>(z) * 4 + static_cast<int>(w) * 2 + static_cast<int>(y);
  }
};

/// "s0,s1,s1"
std::string to_string(const StageTriple& s);
/// Accepts "s0,s1,s1", "s0s1s1" and "011".
StageTriple parse_stage(std::string_view text);
/// Throws UnsupportedStage unless s_z <= s_w <= s_y.
void require_monotone(const StageTriple& s);

/// The four stages realizable from data, in replacement order.
inline constexpr StageTriple kRealWorldStage{s0, s0, s0};
inline constexpr StageTriple kOutcomeStage{s0, s0, s1};
inline constexpr StageTriple kMediatorStage{s0, s1, s1};
inline constexpr StageTriple kModelStage{s1, s1, s1};
inline constexpr StageTriple kDataStages[] = {kRealWorldStage, kOutcomeStage,
                                              kMediatorStage, kModelStage};

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits, identical on every
/// standard library.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; portable across standard libraries.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Derives an independent stream from (seed, stream) for splittable use.
Rng make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace fga
