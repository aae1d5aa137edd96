#pragma once

// JSON family specs, atlas files and section files. Errors are parse errors
// that name the offending field path, e.g. "sampled.matrices[2].im".

#include <filesystem>
#include <string>

#include "json.hpp"

#include "fredholm/atlas.hpp"
#include "fredholm/sections.hpp"

namespace fredholm::cli {

using Json = nlohmann::ordered_json;

Json read_json_file(const std::filesystem::path& path, const std::string& what);

OperatorFamily parse_family_spec(const Json& spec);
Atlas parse_atlas(const Json& j);
WeakSpectralSection parse_section(const Json& j, Eigen::Index ambient_dim);

Json matrix_to_json(const ComplexMatrix& m);
/// Column-major frame: a list of columns, each a list of {re, im} pairs.
Json frame_to_json(const Subspace& s);
Json section_to_json(const WeakSpectralSection& s);
Json atlas_to_json(const Atlas& a);
Json family_to_json(const OperatorFamily& f);

}  // namespace fredholm::cli
