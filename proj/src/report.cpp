#include "coegan/report.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace coegan {

using nlohmann::json;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string sizes(const RoleReport& r) {
  std::string s;
  for (const auto& sp : r.species) s += (s.empty() ? "" : ";") + std::to_string(sp.size);
  return s;
}

void append_line(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::string>& rows) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream os(path, std::ios::app);
  if (fresh) os << header << '\n';
  for (const auto& r : rows) os << r << '\n';
  os.flush();
  if (!os) throw std::runtime_error("failed to write " + path.string());
}

json role_json(const RoleReport& r) {
  json species = json::array();
  for (const auto& s : r.species) species.push_back({s.id, s.size, s.mean_fitness});
  return {{"best", r.best_fitness},       {"mean", r.mean_fitness},
          {"layers", r.mean_layers},      {"reused", r.reused_genes},
          {"threshold", r.threshold},     {"species", species}};
}

RoleReport role_from_json(const json& j) {
  RoleReport r;
  r.best_fitness = j.at("best").get<double>();
  r.mean_fitness = j.at("mean").get<double>();
  r.mean_layers = j.at("layers").get<double>();
  r.reused_genes = j.at("reused").get<int>();
  r.threshold = j.at("threshold").get<double>();
  for (const auto& s : j.at("species"))
    r.species.push_back({s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<double>()});
  return r;
}

std::uint8_t to_byte(double v) {
  const double p = std::clamp((v + 1.0) * 127.5, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::lround(p));
}

}  // namespace

std::string report_csv_header() {
  return "generation,g_best_fitness,g_mean_fitness,d_best_fitness,d_mean_fitness,"
         "g_mean_layers,d_mean_layers,g_reused_genes,d_reused_genes,"
         "g_species_sizes,d_species_sizes,g_threshold,d_threshold";
}

std::string report_csv_row(const GenerationReport& r) {
  const auto& g = r.generators;
  const auto& d = r.discriminators;
  return std::to_string(r.generation) + "," + num(g.best_fitness) + "," + num(g.mean_fitness) +
         "," + num(d.best_fitness) + "," + num(d.mean_fitness) + "," + num(g.mean_layers) + "," +
         num(d.mean_layers) + "," + std::to_string(g.reused_genes) + "," +
         std::to_string(d.reused_genes) + "," + sizes(g) + "," + sizes(d) + "," +
         num(g.threshold) + "," + num(d.threshold);
}

std::string species_csv_header() { return "generation,role,species_id,size,mean_fitness,threshold"; }

std::vector<std::string> species_csv_rows(const GenerationReport& r) {
  std::vector<std::string> rows;
  for (const auto& [role, rep] : {std::pair{"generator", &r.generators},
                                  std::pair{"discriminator", &r.discriminators}})
    for (const auto& s : rep->species)
      rows.push_back(std::to_string(r.generation) + "," + role + "," + std::to_string(s.id) + "," +
                     std::to_string(s.size) + "," + num(s.mean_fitness) + "," +
                     num(rep->threshold));
  return rows;
}

void emit_report_row(const std::filesystem::path& run_dir, const GenerationReport& r) {
  append_line(run_dir / "report.csv", report_csv_header(), {report_csv_row(r)});
  append_line(run_dir / "species.csv", species_csv_header(), species_csv_rows(r));
  append_line(run_dir / "timings.csv", "generation,wall_seconds",
              {std::to_string(r.generation) + "," + num(r.wall_seconds)});
}

void write_report_files(const std::filesystem::path& run_dir,
                        std::span<const GenerationReport> series) {
  for (const char* name : {"report.csv", "species.csv", "timings.csv"})
    std::filesystem::remove(run_dir / name);
  std::ofstream(run_dir / "report.csv") << report_csv_header() << '\n';
  std::ofstream(run_dir / "species.csv") << species_csv_header() << '\n';
  std::ofstream(run_dir / "timings.csv") << "generation,wall_seconds\n";
  for (const auto& r : series) emit_report_row(run_dir, r);
}

json report_to_json(const GenerationReport& r) {
  return {{"generation", r.generation},
          {"generators", role_json(r.generators)},
          {"discriminators", role_json(r.discriminators)},
          {"wall_seconds", r.wall_seconds}};
}

GenerationReport report_from_json(const json& j) {
  GenerationReport r;
  r.generation = j.at("generation").get<int>();
  r.generators = role_from_json(j.at("generators"));
  r.discriminators = role_from_json(j.at("discriminators"));
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  os << (img.channels == 3 ? "P6" : "P5") << '\n'
     << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()),
           static_cast<std::streamsize>(img.pixels.size()));
  if (!os) throw std::runtime_error("failed to write " + path.string());
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::string magic;
  Image img;
  int maxval = 0;
  is >> magic >> img.width >> img.height >> maxval;
  is.get();
  if (!is || (magic != "P5" && magic != "P6") || maxval != 255)
    throw std::runtime_error("not a binary PNM file: " + path.string());
  img.channels = magic == "P6" ? 3 : 1;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw std::runtime_error("truncated PNM file: " + path.string());
  return img;
}

Image tile_samples(const nn::Matrix& samples, nn::TensorShape shape, int rows, int cols) {
  if (samples.rows() != shape.size()) throw std::invalid_argument("tile_samples: shape mismatch");
  Image img;
  img.width = cols * shape.width;
  img.height = rows * shape.height;
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
  const int plane = shape.height * shape.width;
  for (int t = 0; t < rows * cols && t < samples.cols(); ++t) {
    const int ty = t / cols, tx = t % cols;
    for (int y = 0; y < shape.height; ++y)
      for (int x = 0; x < shape.width; ++x) {
        double v = 0.0;
        for (int c = 0; c < shape.channels; ++c) v += samples(c * plane + y * shape.width + x, t);
        const std::size_t px = static_cast<std::size_t>(ty * shape.height + y) * img.width +
                               static_cast<std::size_t>(tx * shape.width + x);
        img.pixels[px] = to_byte(v / shape.channels);
      }
  }
  return img;
}

Image scatter_plot(const nn::Matrix& samples, std::span<const Eigen::Vector2d> centers, int size) {
  Image img;
  img.width = img.height = size;
  img.channels = 3;
  img.pixels.assign(static_cast<std::size_t>(size) * size * 3, 0);
  auto put = [&](double x, double y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int px = static_cast<int>(std::floor((x + 1.0) * 0.5 * (size - 1) + 0.5));
    const int py = static_cast<int>(std::floor((1.0 - y) * 0.5 * (size - 1) + 0.5));
    if (px < 0 || py < 0 || px >= size || py >= size) return;
    const std::size_t i = (static_cast<std::size_t>(py) * size + px) * 3;
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  };
  for (Eigen::Index j = 0; j < samples.cols(); ++j) put(samples(0, j), samples(1, j), 255, 255, 255);
  for (const auto& c : centers)
    for (int d = -2; d <= 2; ++d) {
      const double step = 2.0 / (size - 1);
      put(c.x() + d * step, c.y(), 255, 0, 0);
      put(c.x(), c.y() + d * step, 255, 0, 0);
    }
  return img;
}

void write_line_plot_svg(const std::filesystem::path& path, const std::string& title,
                         std::span<const Series> series) {
  constexpr double kW = 640, kH = 400, kMargin = 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (double v : s.values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    n = std::max(n, s.values.size());
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e"};
  std::ofstream os(path);
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n"
     << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\"" << kW - kMargin
     << "\" y2=\"" << kH - kMargin << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
     << kH - kMargin << "\" stroke=\"black\"/>\n"
     << "<text x=\"5\" y=\"" << kMargin << "\">" << hi << "</text>\n"
     << "<text x=\"5\" y=\"" << kH - kMargin << "\">" << lo << "</text>\n"
     << "<text x=\"" << kW - kMargin << "\" y=\"" << kH - kMargin + 20
     << "\" text-anchor=\"end\">generation " << n << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    os << "<polyline fill=\"none\" stroke=\"" << colors[si % 4] << "\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!std::isfinite(s.values[i])) continue;
      const double x = kMargin + (n > 1 ? double(i) / double(n - 1) : 0.0) * (kW - 2 * kMargin);
      const double y = kH - kMargin - (s.values[i] - lo) / (hi - lo) * (kH - 2 * kMargin);
      os << x << ',' << y << ' ';
    }
    os << "\"/>\n<text x=\"" << kW - kMargin - 150 << "\" y=\"" << kMargin + 15 * (si + 1)
       << "\" fill=\"" << colors[si % 4] << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
}

void write_run_plots(const std::filesystem::path& run_dir,
                     std::span<const GenerationReport> series) {
  Series gb{"best generator FID", {}}, db{"best discriminator loss", {}};
  Series gl{"generator layers", {}}, dl{"discriminator layers", {}};
  Series gr{"generator reused genes", {}}, dr{"discriminator reused genes", {}};
  for (const auto& r : series) {
    gb.values.push_back(r.generators.best_fitness);
    db.values.push_back(r.discriminators.best_fitness);
    gl.values.push_back(r.generators.mean_layers);
    dl.values.push_back(r.discriminators.mean_layers);
    gr.values.push_back(r.generators.reused_genes);
    dr.values.push_back(r.discriminators.reused_genes);
  }
  write_line_plot_svg(run_dir / "fitness_generators.svg", "Best generator fitness (FID)",
                      std::vector{gb});
  write_line_plot_svg(run_dir / "fitness_discriminators.svg", "Best discriminator fitness (loss)",
                      std::vector{db});
  write_line_plot_svg(run_dir / "layers.svg", "Mean layers per genome", std::vector{gl, dl});
  write_line_plot_svg(run_dir / "reused_genes.svg", "Genes with reused parameters",
                      std::vector{gr, dr});
}

AggregateSummary aggregate(std::span<const double> values) {
  AggregateSummary s;
  s.runs = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.runs;
  if (s.runs < 2) {
    s.ci_low = s.ci_high = s.mean;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / (s.runs - 1));
  const boost::math::students_t dist(s.runs - 1);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  const double half = t * s.stddev / std::sqrt(static_cast<double>(s.runs));
  s.ci_low = s.mean - half;
  s.ci_high = s.mean + half;
  return s;
}

}  // namespace coegan
