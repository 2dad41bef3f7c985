#pragma once

// ScmPair fixture documents (JSON).
//
//   {
//     "format": "fga.scm_pair", "version": 1,
//     "mix_p": 0.5,
//     "levels": {"x": [...], "z": [...], "w": [...], "y": [...]},
//     "environments": {
//       "rw": {
//         "noise":  {"xz": [p...], "w": [p...], "y": [p...]},
//         "mech_xz": [[u, x, z], ...],
//         "mech_w":  [[x, z, u, w], ...],
//         "mech_y":  [[x, z, w, u, y], ...]
//       },
//       "gm": { ... }
//     }
//   }
//
// Endogenous values are level labels, noise states are integer indices.
// Every mechanism tuple must appear exactly once.

#include <filesystem>

#include <nlohmann/json.hpp>

#include "fga/scm.hpp"

namespace fga {

nlohmann::json to_json(const ScmPair& pair);
ScmPair scm_pair_from_json(const nlohmann::json& doc);

ScmPair load_scm_pair(const std::filesystem::path& path);
void save_scm_pair(const ScmPair& pair, const std::filesystem::path& path);

/// Binary X, Z, W, Y reference pair with strictly positive tables. The
/// environments differ in every mechanism block.
ScmPair toy_a();

/// Like toy_a() but the model environment inherits the {X,Z} and W blocks
/// from the real world and only replaces the outcome mechanism.
ScmPair toy_a_ml();

/// Resolves a built-in name ("toyA", "toyA-ml") or a fixture path.
ScmPair resolve_pair(const std::string& name_or_path);

}  // namespace fga
