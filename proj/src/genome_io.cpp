#include "coegan/genome_io.hpp"

#include "binary_io.hpp"

#include <fstream>
#include <map>

namespace coegan {

using nlohmann::json;

namespace {

constexpr std::uint32_t kParamsMagic = 0x42504743;  // "CGPB"
constexpr std::uint32_t kParamsVersion = 2;

std::string gene_ref(const Gene& g) {
  return std::to_string(g.lineage_id) + ":" + g.params->signature();
}

json ref_or_null(const ParamRef& p, const std::string& prefix) {
  return p ? json(prefix + ":" + p->signature()) : json(nullptr);
}

std::string ref_string(const json& j) { return j.is_null() ? std::string() : j.get<std::string>(); }

}  // namespace

json genome_to_json(const Genome& g) {
  json genes = json::array();
  for (const Gene& gene : g.genes) {
    json jg{{"layer_type", std::string(to_string(gene.layer_type))},
            {"activation", std::string(nn::to_string(gene.activation))},
            {"lineage_id", gene.lineage_id},
            {"param_ref", gene.params ? json(gene_ref(gene)) : json(nullptr)}};
    if (gene.layer_type == LayerType::Linear)
      jg["out_features"] = gene.out_features;
    else
      jg["out_channels"] = gene.out_channels;
    genes.push_back(std::move(jg));
  }
  return {{"role", std::string(to_string(g.role))},
          {"genes", genes},
          {"fitness", g.fitness},
          {"evaluated", g.evaluated},
          {"reused_gene_count", g.reused_gene_count},
          {"adapter_ref", ref_or_null(g.adapter_params, "adapter")},
          {"head_ref", ref_or_null(g.head_params, "head")}};
}

Genome genome_from_json(const json& j) {
  Genome g;
  g.role = role_from_string(j.at("role").get<std::string>());
  for (const json& jg : j.at("genes")) {
    Gene gene;
    gene.layer_type = layer_type_from_string(jg.at("layer_type").get<std::string>());
    gene.activation = nn::activation_from_string(jg.at("activation").get<std::string>());
    gene.lineage_id = jg.at("lineage_id").get<std::int64_t>();
    if (gene.layer_type == LayerType::Linear)
      gene.out_features = jg.at("out_features").get<int>();
    else
      gene.out_channels = jg.at("out_channels").get<int>();
    g.genes.push_back(gene);
  }
  g.fitness = j.value("fitness", 0.0);
  g.evaluated = j.value("evaluated", false);
  g.reused_gene_count = j.value("reused_gene_count", 0);
  return g;
}

void write_params(const std::filesystem::path& path, const Genome& genome) {
  std::vector<std::pair<std::string, ParamRef>> records;
  for (const Gene& gene : genome.genes)
    if (gene.params) records.emplace_back(gene_ref(gene), gene.params);
  if (genome.adapter_params)
    records.emplace_back("adapter:" + genome.adapter_params->signature(), genome.adapter_params);
  if (genome.head_params)
    records.emplace_back("head:" + genome.head_params->signature(), genome.head_params);

  std::ofstream os(path, std::ios::binary);
  bin::write_u32(os, kParamsMagic);
  bin::write_u32(os, kParamsVersion);
  bin::write_u32(os, static_cast<std::uint32_t>(records.size()));
  for (const auto& [key, blob] : records) {
    bin::write_string(os, key);
    bin::write_u32(os, static_cast<std::uint32_t>(blob->tensors.size()));
    for (const auto& t : blob->tensors) bin::write_matrix(os, t);
    bin::write_u32(os, static_cast<std::uint32_t>(blob->square_avg.size()));
    for (const auto& t : blob->square_avg) bin::write_matrix(os, t);
  }
  if (!os) throw std::runtime_error("failed to write " + path.string());
}

void read_params(const std::filesystem::path& path, Genome& genome) {
  // Matched by lineage id; load_genome cross-checks the full refs.
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  if (bin::read_u32(is) != kParamsMagic) throw std::runtime_error(path.string() + ": bad magic");
  if (bin::read_u32(is) != kParamsVersion)
    throw std::runtime_error(path.string() + ": unsupported version");
  std::map<std::string, ParamRef> blobs;
  const std::uint32_t n = bin::read_u32(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string key = bin::read_string(is);
    auto blob = std::make_shared<ParamBlob>();
    const std::uint32_t count = bin::read_u32(is);
    for (std::uint32_t t = 0; t < count; ++t) blob->tensors.push_back(bin::read_matrix(is));
    const std::uint32_t state = bin::read_u32(is);
    for (std::uint32_t t = 0; t < state; ++t) blob->square_avg.push_back(bin::read_matrix(is));
    if (key.substr(key.find(':') + 1) != blob->signature())
      throw std::runtime_error(path.string() + ": blob " + key + " has mismatched shape");
    blobs.emplace(std::move(key), std::move(blob));
  }
  auto find_prefix = [&](const std::string& prefix) -> ParamRef {
    const auto it = blobs.lower_bound(prefix);
    if (it != blobs.end() && it->first.compare(0, prefix.size(), prefix) == 0) return it->second;
    return nullptr;
  };
  for (Gene& gene : genome.genes) gene.params = find_prefix(std::to_string(gene.lineage_id) + ":");
  genome.adapter_params = find_prefix("adapter:");
  genome.head_params = find_prefix("head:");
}

void save_genome(const std::filesystem::path& dir, const std::string& stem, const Genome& genome) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (stem + ".json")) << genome_to_json(genome).dump(2) << '\n';
  write_params(dir / (stem + ".params"), genome);
}

Genome load_genome(const std::filesystem::path& dir, const std::string& stem) {
  std::ifstream is(dir / (stem + ".json"));
  if (!is) throw std::runtime_error("cannot open " + (dir / (stem + ".json")).string());
  const json j = json::parse(is);
  Genome g = genome_from_json(j);
  read_params(dir / (stem + ".params"), g);
  // Every ref recorded in the JSON must have been found.
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    const std::string want = ref_string(j.at("genes").at(i).at("param_ref"));
    const std::string got = g.genes[i].params ? gene_ref(g.genes[i]) : std::string();
    if (want != got) throw std::runtime_error("param blob missing for gene " + std::to_string(i) + " (" + want + ")");
  }
  if (ref_string(j.value("adapter_ref", json(nullptr))).empty() != !g.adapter_params ||
      ref_string(j.value("head_ref", json(nullptr))).empty() != !g.head_params)
    throw std::runtime_error("implicit-layer params inconsistent with genome JSON");
  return g;
}

}  // namespace coegan
