#pragma once

#include "coegan/genome.hpp"

#include "json.hpp"

#include <filesystem>

namespace coegan {

/// {role, genes[{layer_type, activation, out_features|out_channels,
/// lineage_id, param_ref}], ...}. param_ref is "<lineage_id>:<shape
/// signature>" or null; blobs live in a separate file.
nlohmann::json genome_to_json(const Genome& genome);
/// Structure only; attach params with read_params.
Genome genome_from_json(const nlohmann::json& j);

/// Binary blob file: records keyed by param_ref ("<lineage>:<sig>",
/// "adapter:<sig>", "head:<sig>").
void write_params(const std::filesystem::path& path, const Genome& genome);
/// Attaches blobs whose keys match the genome's param refs. Throws if a
/// referenced blob is missing or its shape disagrees with its signature.
void read_params(const std::filesystem::path& path, Genome& genome);

/// `<dir>/<stem>.json` + `<dir>/<stem>.params`.
void save_genome(const std::filesystem::path& dir, const std::string& stem, const Genome& genome);
Genome load_genome(const std::filesystem::path& dir, const std::string& stem);

}  // namespace coegan
