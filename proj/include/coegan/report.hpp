#pragma once

#include "coegan/nn.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace coegan {

struct SpeciesSummary {
  int id = 0;
  int size = 0;
  double mean_fitness = 0.0;
};

struct RoleReport {
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double mean_layers = 0.0;
  int reused_genes = 0;
  double threshold = 0.0;  // threshold used for this generation's clustering
  std::vector<SpeciesSummary> species;
};

struct GenerationReport {
  int generation = 0;  // 1-based
  RoleReport generators;
  RoleReport discriminators;
  double wall_seconds = 0.0;  // kept out of the CSV so reruns diff cleanly
};

std::string report_csv_header();
std::string report_csv_row(const GenerationReport& r);
std::string species_csv_header();
std::vector<std::string> species_csv_rows(const GenerationReport& r);

/// Appends one row to report.csv (header first if the file is new) and the
/// matching species rows to species.csv in the same directory.
void emit_report_row(const std::filesystem::path& run_dir, const GenerationReport& r);
/// Rewrites report.csv/species.csv from a full series.
void write_report_files(const std::filesystem::path& run_dir,
                        std::span<const GenerationReport> series);

nlohmann::json report_to_json(const GenerationReport& r);
GenerationReport report_from_json(const nlohmann::json& j);

struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1: PGM, 3: PPM
  std::vector<std::uint8_t> pixels;
};

void write_pnm(const std::filesystem::path& path, const Image& img);
Image read_pnm(const std::filesystem::path& path);

/// Tiles rows×cols samples (columns of `samples`, shape `shape`) into one
/// grayscale image, mapping [-1, 1] to [0, 255]. Multi-channel samples are
/// averaged across channels.
Image tile_samples(const nn::Matrix& samples, nn::TensorShape shape, int rows, int cols);

/// Scatter of 2-D samples (white) over the true mode centers (red), viewport
/// [-1, 1]^2.
Image scatter_plot(const nn::Matrix& samples, std::span<const Eigen::Vector2d> centers, int size);

struct Series {
  std::string label;
  std::vector<double> values;
};

/// Static line plot against generation index.
void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         std::span<const Series> series);

/// Fitness, layer-count and reused-gene curves for a run directory.
void write_run_plots(const std::filesystem::path& run_dir,
                     std::span<const GenerationReport> series);

struct AggregateSummary {
  int runs = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Mean, sample standard deviation, and Student-t 95% confidence interval.
AggregateSummary aggregate(std::span<const double> values);

}  // namespace coegan
