// Acceptance checks: one PASS/FAIL/SKIP line per criterion.
#include "coegan/evolution.hpp"
#include "coegan/harness.hpp"
#include "coegan/random.hpp"
#include "coegan/variation.hpp"

#include "CLI11.hpp"
#include "allocation_oracle.hpp"
#include "fid_oracle.hpp"
#include "genome_factory.hpp"
#include "gradcheck.hpp"
#include "toy_gan.hpp"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

using namespace coegan;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Fail;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(detail)}; }

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

bool bit_identical(const nn::Network& a, const nn::Network& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& pa = a.layer(i).parameters();
    const auto& pb = b.layer(i).parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t j = 0; j < pa.size(); ++j)
      if (pa[j].size() != pb[j].size() ||
          std::memcmp(pa[j].data(), pb[j].data(), sizeof(double) * static_cast<std::size_t>(pa[j].size())) != 0)
        return false;
  }
  return true;
}

// ---- 1: FID against the closed form for commuting covariances ----
Outcome fid_oracle() {
  nn::Rng rng(101);
  double worst = 0.0, self = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int d = std::uniform_int_distribution<int>(1, 8)(rng);
    const auto p = testutil::commuting_pair(d, rng);
    worst = std::max(worst, std::abs(fid(p.real, p.fake) - testutil::closed_form_fid(p)));
    self = std::max(self, std::abs(fid(p.real, p.real)));
  }
  Stats a, b;
  a.mean = Eigen::VectorXd::Zero(1);
  a.cov = Eigen::MatrixXd::Ones(1, 1);
  b.mean = Eigen::VectorXd::Ones(1);
  b.cov = Eigen::MatrixXd::Ones(1, 1);
  const double one_d = std::abs(fid(a, b) - 1.0);
  return pass_if(worst <= 1e-6 && self <= 1e-6 && one_d <= 1e-9,
                 "max |fid - closed form| " + fmt(worst) + ", max fid(a,a) " + fmt(self) + ", 1-D error " +
                     fmt(one_d));
}

// ---- 2: PSD square root reconstruction ----
Outcome sqrt_reconstruction() {
  nn::Rng rng(102);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int d = std::uniform_int_distribution<int>(1, 64)(rng);
    // Every fourth matrix is rank deficient.
    const int r = t % 4 == 3 ? std::uniform_int_distribution<int>(1, d)(rng) : d;
    const Eigen::MatrixXd b = nn::standard_normal(d, r, rng);
    const Eigen::MatrixXd a = b * b.transpose();
    const Eigen::MatrixXd s = matrix_sqrt_psd(a);
    worst = std::max(worst, (s * s - a).norm() / a.norm());
  }
  return pass_if(worst < 1e-6, "max relative Frobenius error " + fmt(worst));
}

// ---- 3: loss gradients vs central differences ----
Outcome loss_gradients() {
  nn::Rng rng(103);
  auto pair = testutil::toy_pair(4, 6, rng);
  const nn::Matrix z = nn::standard_normal(4, 16, rng);
  const nn::Matrix real = nn::standard_normal(2, 16, rng) * 0.5;
  const nn::Matrix fake = pair.g.forward(z);
  double worst = 0.0;
  auto dg = pair.d.zero_gradients();
  discriminator_step_loss(pair.d, real, fake, &dg);
  auto gg = pair.g.zero_gradients();
  generator_step_loss(pair.g, pair.d, z, &gg);
  for (std::size_t l : {0u, 2u})
    for (std::size_t t = 0; t < 2; ++t) {
      worst = std::max(worst, testutil::max_relative_error(pair.d.layer(l).parameters()[t], dg[l][t], [&] {
                         return discriminator_step_loss(pair.d, real, fake, nullptr);
                       }));
      worst = std::max(worst, testutil::max_relative_error(pair.g.layer(l).parameters()[t], gg[l][t], [&] {
                         return generator_step_loss(pair.g, pair.d, z, nullptr);
                       }));
    }
  return pass_if(worst < 1e-4, "max relative error " + fmt(worst));
}

// ---- 4: genome and shape properties at full gene ranges ----
Outcome genome_properties() {
  nn::Rng rng(104);
  IdSource ids;
  const GeneRanges ranges;  // 32..1024 features, 16..128 channels
  const int limit = 4;
  const nn::TensorShape image{1, 28, 28};
  const ShapeConfig shape;
  const VariationConfig vcfg{{0.3, 0.1, 0.1}, limit, ranges};
  int bad = 0, checked = 0, varied = 0;
  std::string first_problem;
  auto note = [&](const std::string& what) {
    if (bad++ == 0) first_problem = what;
  };
  for (Role role : {Role::Generator, Role::Discriminator}) {
    std::vector<Genome> pop;
    for (int i = 0; i < 500; ++i) pop.push_back(testutil::random_valid_genome(role, limit, rng, ids, ranges));
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const Genome& g = pop[i];
      ++checked;
      if (!validate(g, limit, ranges).empty()) {
        note("random genome invalid");
        continue;
      }
      const ShapePlan plan = infer_shapes(g, image, shape);
      const Phenotype ph = build_phenotype(g, plan, rng);
      const int in_rows = role == Role::Generator ? shape.latent_dim : image.size();
      const nn::Matrix out = ph.network.forward(nn::standard_normal(in_rows, 64, rng));
      const int want_rows = role == Role::Generator ? image.size() : 1;
      if (out.rows() != want_rows || out.cols() != 64 || !out.allFinite()) note("bad forward output shape");
      const Genome child = mutate(g, vcfg, rng, ids);
      const Genome cross = crossover(child, pop[(i + 1) % pop.size()], limit, rng);
      varied += 2;
      if (!validate(child, limit, ranges).empty()) note("mutation output invalid");
      if (!validate(cross, limit, ranges).empty()) note("crossover output invalid");
    }
  }
  return pass_if(bad == 0, std::to_string(checked) + " genomes, " + std::to_string(varied) +
                               " variation outputs, " + std::to_string(bad) + " problems" +
                               (bad ? " (first: " + first_problem + ")" : ""));
}

// ---- 5: speciation suite ----
Outcome speciation_suite() {
  nn::Rng rng(105);
  IdSource ids;
  const auto ranges = testutil::small_ranges();
  int problems = 0;
  for (int t = 0; t < 1000; ++t) {
    const Role role = t % 2 ? Role::Generator : Role::Discriminator;
    const Genome a = testutil::random_valid_genome(role, 4, rng, ids, ranges);
    const Genome b = testutil::random_valid_genome(role, 4, rng, ids, ranges);
    const int dab = genome_distance(a, b);
    if (genome_distance(a, a) != 0 || dab != genome_distance(b, a) || dab < 0) ++problems;
  }
  for (int t = 0; t < 50; ++t) {
    std::vector<Genome> pop;
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    for (int i = 0; i < n; ++i) pop.push_back(testutil::random_valid_genome(Role::Discriminator, 4, rng, ids, ranges));
    SpeciationState st = SpeciationState::initial({4, std::uniform_real_distribution<double>(0.0, 4.0)(rng), 0.5});
    for (int round = 0; round < 3; ++round) {
      st = assign_species(pop, st, rng);
      std::vector<int> seen(static_cast<std::size_t>(n), 0);
      for (const auto& sp : st.species) {
        if (sp.members.empty()) ++problems;
        for (int m : sp.members) ++seen[static_cast<std::size_t>(m)];
      }
      if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) ++problems;
      st.threshold = adjust_threshold(st, static_cast<int>(st.species.size()));
    }
  }
  for (int t = 0; t < 100; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    const int size = std::uniform_int_distribution<int>(n, 30)(rng);
    std::vector<double> means(static_cast<std::size_t>(n));
    for (double& m : means) m = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
    const auto got = allocate_by_mean_fitness(means, size);
    if (got != testutil::largest_remainder_oracle(means, size)) ++problems;
    if (std::accumulate(got.begin(), got.end(), 0) != size) ++problems;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i] < 1) ++problems;
      for (std::size_t j = 0; j < got.size(); ++j)
        if (means[i] < means[j] && got[i] < got[j]) ++problems;
    }
  }
  const std::vector<double> example{1.0, 3.0};
  const bool six_two = allocate_by_mean_fitness(example, 8) == std::vector<int>{6, 2};
  return pass_if(problems == 0 && six_two,
                 std::to_string(problems) + " property violations; {1,3} x 8 -> {6,2}: " + (six_two ? "yes" : "no"));
}

// ---- 6: batch budgets and frozen adversaries ----
Outcome budget_and_freeze() {
  bool sums = true;
  std::string budgets;
  for (int k : {1, 2, 3, 5}) {
    const auto b = budget_split(20, k);
    sums = sums && static_cast<int>(b.size()) == k && std::accumulate(b.begin(), b.end(), 0) == 20;
    budgets += " k=" + std::to_string(k) + ":" + std::to_string(std::accumulate(b.begin(), b.end(), 0));
  }
  nn::Rng rng(106);
  auto pair = testutil::toy_pair(100, 8, rng);
  Dataset data;
  data.sample_shape = {2, 1, 1};
  data.samples = nn::standard_normal(2, 512, rng);
  BatchIterator it(data, 64, 1);
  TrainConfig cfg;
  const nn::Network g0 = pair.g;
  nn::RmsProp opt_d(pair.d, cfg.optimizer);
  train_pairing(Role::Discriminator, pair.d, opt_d, pair.g, &it, 20, cfg, rng);
  const bool g_frozen = bit_identical(pair.g, g0);
  const nn::Network d1 = pair.d;
  nn::RmsProp opt_g(pair.g, cfg.optimizer);
  train_pairing(Role::Generator, pair.g, opt_g, pair.d, nullptr, 20, cfg, rng);
  const bool d_frozen = bit_identical(pair.d, d1);
  const bool trained = !bit_identical(pair.g, g0);
  return pass_if(sums && g_frozen && d_frozen && trained,
                 "budget sums" + budgets + "; adversary G frozen " + (g_frozen ? "yes" : "no") +
                     ", adversary D frozen " + (d_frozen ? "yes" : "no"));
}

// ---- 7 and 8: desk-scale ring runs ----
RunConfig ring_config(std::uint64_t seed) {
  RunConfig c;
  c.dataset = "ring";
  c.extractor = "identity";
  c.pop_gen = 5;
  c.pop_disc = 5;
  c.genome_limit = 3;
  c.generations = 20;
  c.seed = seed;
  return c;
}

constexpr int kRingSeeds = 10;
constexpr int kModeSamples = 2000;

struct RingRun {
  double first_best = 0.0;
  double final_best = 0.0;
  int modes = 0;
  std::vector<GenerationReport> reports;
};

int covered_modes(const nn::Matrix& x, const std::vector<Eigen::Vector2d>& centers, double radius,
                  double min_share) {
  std::vector<int> count(centers.size(), 0);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < centers.size(); ++m) {
      const double d = (x.col(i) - centers[m]).norm();
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    if (best_d <= radius) ++count[best];
  }
  return static_cast<int>(std::count_if(count.begin(), count.end(), [&](int c) {
    return c >= min_share * static_cast<double>(x.cols());
  }));
}

std::vector<RingRun> ring_runs(double add_rate) {
  std::vector<RingRun> out;
  for (int seed = 1; seed <= kRingSeeds; ++seed) {
    RunConfig c = ring_config(static_cast<std::uint64_t>(seed));
    c.rates.add = add_rate;
    const Environment env = make_environment(c);
    const RunResult r = run(c, env);
    RingRun rr;
    rr.reports = r.reports;
    rr.first_best = r.reports.front().generators.best_fitness;
    rr.final_best = r.reports.back().generators.best_fitness;
    // previous_best holds the last evaluated generation with trained params.
    nn::Rng rng(derive_seed({c.seed, 7007}));
    const nn::Matrix x =
        generate_samples(r.state.previous_best.generators.front(), c, env.dataset.sample_shape, kModeSamples, rng);
    rr.modes = covered_modes(x, env.ring_centers, 3.0 * c.ring.sigma, 0.02);
    std::cout << "    seed " << seed << ": gen-1 best " << fmt(rr.first_best, 4) << ", final best "
              << fmt(rr.final_best, 4) << ", ratio " << fmt(rr.final_best / rr.first_best) << ", modes "
              << rr.modes << "/8" << std::endl;
    out.push_back(std::move(rr));
  }
  return out;
}

Outcome ring_convergence() {
  const auto runs = ring_runs(RunConfig{}.rates.add);
  int halved = 0, covered = 0;
  for (const auto& r : runs) {
    halved += r.final_best <= 0.5 * r.first_best;
    covered += r.modes >= 6;
  }
  return pass_if(halved >= 8 && covered >= 7, "fitness halved in " + std::to_string(halved) +
                                                   "/10 seeds (need 8), >=6 modes in " +
                                                   std::to_string(covered) + "/10 seeds (need 7)");
}

// Seed-averaged series; a decrease before the layer count saturates fails.
Outcome dynamics_shape() {
  const auto runs = ring_runs(0.5);
  const std::size_t gens = runs.front().reports.size();
  const double limit = ring_config(1).genome_limit;
  std::map<std::string, std::vector<double>> series;
  for (std::size_t t = 0; t < gens; ++t) {
    double lg = 0.0, ld = 0.0, reused = 0.0;
    for (const auto& r : runs) {
      lg += r.reports[t].generators.mean_layers;
      ld += r.reports[t].discriminators.mean_layers;
      reused += r.reports[t].generators.reused_genes + r.reports[t].discriminators.reused_genes;
    }
    const double n = static_cast<double>(runs.size());
    series["layers G"].push_back(lg / n);
    series["layers D"].push_back(ld / n);
    series["reused"].push_back(reused / n);
  }
  std::string detail;
  bool ok = true;
  for (const auto& [name, s] : series) {
    const bool layers = name != "reused";
    int drops = 0;
    for (std::size_t t = 1; t < s.size(); ++t) {
      if (layers && s[t - 1] >= limit) break;
      drops += s[t] < s[t - 1];
    }
    ok = ok && drops == 0;
    std::cout << "    " << name << ":";
    for (double v : s) std::cout << ' ' << fmt(v);
    std::cout << std::endl;
    detail += (detail.empty() ? "" : ", ") + name + " drops " + std::to_string(drops);
  }
  return pass_if(ok, detail + " (seed-averaged over " + std::to_string(runs.size()) + " seeds)");
}

// ---- 9: determinism ----
Outcome determinism() {
  RunConfig c = ring_config(42);
  c.generations = 6;
  const Environment env = make_environment(c);
  const fs::path base = fs::temp_directory_path() / "coegan_acceptance_det";
  fs::remove_all(base);
  run(c, env, {base / "a"});
  run(c, env, {base / "b"});
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  bool same = true;
  for (const char* f : {"report.csv", "species.csv"}) same = same && slurp(base / "a" / f) == slurp(base / "b" / f);
  const bool nonempty = slurp(base / "a" / "report.csv").size() > 100;
  fs::remove_all(base);
  return pass_if(same && nonempty, std::string("report.csv and species.csv ") + (same ? "identical" : "differ"));
}

// ---- 10: MNIST smoke run ----
Outcome mnist_smoke() {
  const char* root = std::getenv("COEGAN_DATA_ROOT");
  if (!root || !fs::exists(fs::path(root) / "train-images-idx3-ubyte"))
    return {Verdict::Skip, "MNIST not found: set COEGAN_DATA_ROOT to a directory with train-images-idx3-ubyte"};
  const fs::path out = fs::temp_directory_path() / "coegan_acceptance_mnist";
  int decreased = 0;
  for (int seed = 1; seed <= 5; ++seed) {
    RunConfig c;
    c.pop_gen = 10;
    c.pop_disc = 10;
    c.generations = 15;
    c.seed = static_cast<std::uint64_t>(seed);
    c.data_root = root;
    const auto res = run_experiment(c, out / ("seed_" + std::to_string(seed)), 1);
    const auto state = load_checkpoint(*latest_checkpoint(res.run_dirs.front()), c);
    const auto& reps = state.second;
    const double first = reps.front().generators.best_fitness, last = reps.back().generators.best_fitness;
    decreased += last < first;
    std::cout << "    seed " << seed << ": FID " << fmt(first, 4) << " -> " << fmt(last, 4) << std::endl;
  }
  return pass_if(decreased >= 4, "best FID decreased in " + std::to_string(decreased) + "/5 seeds (need 4)");
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> check;
  double limit_seconds;  // 0: no runtime bound
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "FID closed-form oracle", fid_oracle, 10},
      {2, "PSD square root reconstruction", sqrt_reconstruction, 30},
      {3, "loss gradient check", loss_gradients, 30},
      {4, "genome/shape property suite", genome_properties, 300},
      {5, "speciation suite", speciation_suite, 0},
      {6, "batch budget and frozen adversaries", budget_and_freeze, 0},
      {7, "desk-scale ring convergence", ring_convergence, 900},
      {8, "dynamics shape", dynamics_shape, 0},
      {9, "determinism", determinism, 0},
      {10, "MNIST smoke run", mnist_smoke, 7200},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.verdict == Verdict::Pass && c.limit_seconds > 0 && secs > c.limit_seconds) {
      o.verdict = Verdict::Fail;
      o.detail += "; over the " + fmt(c.limit_seconds) + " s limit";
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Skip ? "SKIP" : "FAIL";
    failures += o.verdict == Verdict::Fail;
    std::cout << tag << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " [" << fmt(secs)
              << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
