#include "fga/scm_io.hpp"

#include <fstream>
#include <map>
#include <set>

namespace fga {
namespace {

using nlohmann::json;

int level_index(const std::vector<std::string>& levels, const json& v, const char* block) {
  const std::string label = v.is_string() ? v.get<std::string>() : v.dump();
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == label) return static_cast<int>(i);
  }
  throw ValidationError(std::string("undeclared ") + block + " level '" + label + "'");
}

std::size_t noise_index(const json& v, std::size_t n, const char* block) {
  if (!v.is_number_integer() || v.get<long long>() < 0 ||
      static_cast<std::size_t>(v.get<long long>()) >= n) {
    throw ValidationError(std::string(block) + ": noise state out of range: " + v.dump());
  }
  return static_cast<std::size_t>(v.get<long long>());
}

json env_to_json(const Levels& l, const ScmEnvironment& env) {
  json out;
  out["noise"] = {{"xz", env.noise_xz}, {"w", env.noise_w}, {"y", env.noise_y}};
  json xz = json::array();
  for (std::size_t u = 0; u < env.mech_xz.size(); ++u) {
    xz.push_back({u, l.x[static_cast<std::size_t>(env.mech_xz[u].x)],
                  l.z[static_cast<std::size_t>(env.mech_xz[u].z)]});
  }
  json mw = json::array();
  for (int x = 0; x < l.nx(); ++x) {
    for (int z = 0; z < l.nz(); ++z) {
      for (std::size_t u = 0; u < env.noise_w.size(); ++u) {
        mw.push_back({l.x[static_cast<std::size_t>(x)], l.z[static_cast<std::size_t>(z)], u,
                      l.w[static_cast<std::size_t>(env.w(x, z, u))]});
      }
    }
  }
  json my = json::array();
  for (int x = 0; x < l.nx(); ++x) {
    for (int z = 0; z < l.nz(); ++z) {
      for (int w = 0; w < l.nw(); ++w) {
        for (std::size_t u = 0; u < env.noise_y.size(); ++u) {
          my.push_back({l.x[static_cast<std::size_t>(x)], l.z[static_cast<std::size_t>(z)],
                        l.w[static_cast<std::size_t>(w)], u,
                        l.y[static_cast<std::size_t>(env.y(x, z, w, u))]});
        }
      }
    }
  }
  out["mech_xz"] = std::move(xz);
  out["mech_w"] = std::move(mw);
  out["mech_y"] = std::move(my);
  return out;
}

ScmEnvironment env_from_json(const Levels& l, const json& doc, const std::string& name) {
  const json& noise = doc.at("noise");
  const auto nxz = noise.at("xz").get<std::vector<double>>();
  const auto nw = noise.at("w").get<std::vector<double>>();
  const auto ny = noise.at("y").get<std::vector<double>>();
  ScmEnvironment env = ScmEnvironment::shaped(l, nxz.size(), nw.size(), ny.size());
  env.noise_xz = nxz;
  env.noise_w = nw;
  env.noise_y = ny;

  const std::string where = name + ".";
  std::set<std::size_t> seen_xz;
  for (const json& t : doc.at("mech_xz")) {
    if (!t.is_array() || t.size() != 3) throw ValidationError(where + "mech_xz: tuples are [u, x, z]");
    const std::size_t u = noise_index(t[0], nxz.size(), "mech_xz");
    if (!seen_xz.insert(u).second) throw ValidationError(where + "mech_xz: duplicate u_xz " + t[0].dump());
    env.mech_xz[u] = XZ{level_index(l.x, t[1], "x"), level_index(l.z, t[2], "z")};
  }
  if (seen_xz.size() != nxz.size()) throw ValidationError(where + "mech_xz is not total over u_xz");

  std::set<std::size_t> seen_w;
  for (const json& t : doc.at("mech_w")) {
    if (!t.is_array() || t.size() != 4) throw ValidationError(where + "mech_w: tuples are [x, z, u, w]");
    const int x = level_index(l.x, t[0], "x");
    const int z = level_index(l.z, t[1], "z");
    const std::size_t u = noise_index(t[2], nw.size(), "mech_w");
    const std::size_t key = (static_cast<std::size_t>(x) * l.nz() + z) * nw.size() + u;
    if (!seen_w.insert(key).second) throw ValidationError(where + "mech_w: duplicate tuple " + t.dump());
    env.w_at(x, z, u) = level_index(l.w, t[3], "w");
  }
  if (seen_w.size() != env.mech_w.size()) throw ValidationError(where + "mech_w is not total over (x, z, u_w)");

  std::set<std::size_t> seen_y;
  for (const json& t : doc.at("mech_y")) {
    if (!t.is_array() || t.size() != 5) throw ValidationError(where + "mech_y: tuples are [x, z, w, u, y]");
    const int x = level_index(l.x, t[0], "x");
    const int z = level_index(l.z, t[1], "z");
    const int w = level_index(l.w, t[2], "w");
    const std::size_t u = noise_index(t[3], ny.size(), "mech_y");
    const std::size_t key = ((static_cast<std::size_t>(x) * l.nz() + z) * l.nw() + w) * ny.size() + u;
    if (!seen_y.insert(key).second) throw ValidationError(where + "mech_y: duplicate tuple " + t.dump());
    env.y_at(x, z, w, u) = level_index(l.y, t[4], "y");
  }
  if (seen_y.size() != env.mech_y.size()) throw ValidationError(where + "mech_y is not total over (x, z, w, u_y)");
  return env;
}

}  // namespace

json to_json(const ScmPair& pair) {
  json doc;
  doc["format"] = "fga.scm_pair";
  doc["version"] = 1;
  doc["mix_p"] = pair.mix_p;
  doc["levels"] = {{"x", pair.levels.x}, {"z", pair.levels.z}, {"w", pair.levels.w}, {"y", pair.levels.y}};
  doc["environments"] = {{"rw", env_to_json(pair.levels, pair.rw)},
                         {"gm", env_to_json(pair.levels, pair.gm)}};
  return doc;
}

ScmPair scm_pair_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string{}) != "fga.scm_pair") {
      throw ValidationError("not an fga.scm_pair document");
    }
    if (doc.value("version", 0) != 1) throw ValidationError("unsupported scm_pair version");
    ScmPair pair;
    const json& lv = doc.at("levels");
    pair.levels.x = lv.at("x").get<std::vector<std::string>>();
    pair.levels.z = lv.at("z").get<std::vector<std::string>>();
    pair.levels.w = lv.at("w").get<std::vector<std::string>>();
    pair.levels.y = lv.at("y").get<std::vector<std::string>>();
    pair.mix_p = doc.value("mix_p", 0.5);
    pair.rw = env_from_json(pair.levels, doc.at("environments").at("rw"), "rw");
    pair.gm = env_from_json(pair.levels, doc.at("environments").at("gm"), "gm");
    pair.validate();
    return pair;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed scm_pair document: ") + e.what());
  }
}

ScmPair load_scm_pair(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return scm_pair_from_json(doc);
}

void save_scm_pair(const ScmPair& pair, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json(pair).dump(2) << '\n';
}

ScmPair resolve_pair(const std::string& name_or_path) {
  if (name_or_path == "toyA") return toy_a();
  if (name_or_path == "toyA-ml") return toy_a_ml();
  return load_scm_pair(name_or_path);
}

}  // namespace fga
