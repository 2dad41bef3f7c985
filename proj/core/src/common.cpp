#include "fga/common.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

namespace fga {

std::string_view to_string(Env e) { return e == Env::rw ? "s0" : "s1"; }

Env parse_env(std::string_view text) {
  if (text == "s0" || text == "0" || text == "rw") return Env::rw;
  if (text == "s1" || text == "1" || text == "gm") return Env::gm;
  throw ValidationError("unknown environment '" + std::string(text) + "'");
}

std::string to_string(const StageTriple& s) {
  std::string out;
  out += to_string(s.z);
  out += ',';
  out += to_string(s.w);
  out += ',';
  out += to_string(s.y);
  return out;
}

StageTriple parse_stage(std::string_view text) {
  std::string compact;
  for (char c : text) {
    if (c != ',' && c != ' ' && c != '(' && c != ')') compact += c;
  }
  std::vector<Env> parts;
  std::size_t i = 0;
  while (i < compact.size()) {
    if (compact[i] == 's' && i + 1 < compact.size()) {
      parts.push_back(parse_env(compact.substr(i, 2)));
      i += 2;
    } else {
      parts.push_back(parse_env(compact.substr(i, 1)));
      i += 1;
    }
  }
  if (parts.size() == 1) return StageTriple::constant(parts[0]);
  if (parts.size() != 3) {
    throw ValidationError("stage must have three components, got '" + std::string(text) + "'");
  }
  return {parts[0], parts[1], parts[2]};
}

void require_monotone(const StageTriple& s) {
  if (!s.monotone()) {
    throw UnsupportedStage("unsupported stage (" + to_string(s) +
                           "): data can only realize s_z <= s_w <= s_y");
  }
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_index over an empty range");
  const std::uint64_t limit = Rng::max() - Rng::max() % n;
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % n;
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace fga
