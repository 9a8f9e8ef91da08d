#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "qising/ising.hpp"
#include "qising/pevi.hpp"
#include "qising/qnetwork.hpp"

namespace qising {

using Json = nlohmann::ordered_json;

Json to_json(const IsingParams& params);
IsingParams params_from_json(const Json& j);

Json to_json(const PosteriorDraws& draws);
PosteriorDraws draws_from_json(const Json& j);

/// Layer widths, row-major weights, and {psi, alpha, seed, state_dim, n_actions}.
Json to_json(const QFunction& q);
QFunction qfunction_from_json(const Json& j);

Json to_json(const PeviPolicy& policy);
PeviPolicy pevi_from_json(const Json& j);

Json to_json(const QIsingState& s);
Json to_json(const Transition& t);

/// Writes to a sibling temp file, then renames over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace qising
