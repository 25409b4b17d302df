#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "lecam.hpp"

namespace fs = std::filesystem;
using namespace lecam;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<int> jmax;
  std::optional<std::size_t> reps;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
}

template <class T>
T get_or(const json& c, const char* key, T def) {
  if (!c.contains(key)) return def;
  try {
    return c.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

DensityModel density_or(const json& c, const char* key, const std::optional<DensityModel>& def = std::nullopt) {
  if (c.contains(key)) return density_from_descriptor(c.at(key));
  if (def) return *def;
  throw ConfigError(std::string("config needs a '") + key + "' density descriptor");
}

std::vector<std::size_t> n_grid(const json& c) {
  if (c.contains("n_grid")) return get_or<std::vector<std::size_t>>(c, "n_grid", {});
  return dyadic_grid(get_or(c, "log2_from", 8), get_or(c, "log2_to", 16));
}

std::uint64_t seed_of(const Common& o, const json& c) { return o.seed ? *o.seed : get_or<std::uint64_t>(c, "seed", 1); }

fs::path out_dir(const Common& o) {
  fs::path p(o.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ConfigError("cannot create output directory '" + o.out + "'");
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
}

json manifest(const std::string& cmd, const json& cfg, std::uint64_t seed, const Common& o) {
  return json{{"command", cmd},
              {"version", kVersion},
              {"config", cfg},
              {"config_hash", hex64(fnv1a(cfg.dump()))},
              {"seed", seed},
              {"jmax", o.jmax ? json(*o.jmax) : json(nullptr)},
              {"jmax_cap", get_or(cfg, "jmax_cap", 10)}};
}

int cmd_simulate(const Common& o) {
  const json cfg = load_config(o.config);
  const auto seed = seed_of(o, cfg);
  const auto exp = get_or<std::string>(cfg, "experiment", "density");
  const auto n = get_or<std::size_t>(cfg, "n", 100);
  const auto f = density_or(cfg, "density", uniform_density());
  const auto dir = out_dir(o);
  json man = manifest("simulate", cfg, seed, o);
  if (exp == "density") {
    const auto s = sample_density(f, n, seed);
    write_points_csv((dir / "samples.csv").string(), s.points);
    man["points"] = s.points.size();
  } else if (exp == "poisson") {
    const auto s = sample_poisson_process(f, n, seed);
    write_points_csv((dir / "samples.csv").string(), s.points);
    man["points"] = s.points.size();
  } else if (exp == "gwn") {
    const auto mode = variance_mode_from_string(get_or<std::string>(cfg, "mode", "unit"));
    const auto cells = get_or<std::size_t>(cfg, "grid_cells", 1024);
    GwnPath y;
    if (mode == VarianceMode::Step) {
      if (!cfg.contains("f0")) throw ConfigError("gwn step mode needs an 'f0' descriptor");
      const auto f0 = density_from_descriptor(cfg.at("f0"));
      const auto beta = get_or(cfg, "beta", f0.beta());
      const auto prof = step_approx(f0, build_partition(f0, n, beta));
      y = sample_gwn(f, n, cells, mode, &prof, seed);
    } else {
      y = sample_gwn(f, n, cells, mode, nullptr, seed);
    }
    write_gwn_csv((dir / "samples.csv").string(), y);
    man["cells"] = y.cells();
  } else {
    throw ConfigError("unknown experiment '" + exp + "'");
  }
  write_json(dir / "manifest.json", man);
  return 0;
}

int cmd_transform(const Common& o) {
  const json cfg = load_config(o.config);
  const auto seed = seed_of(o, cfg);
  const auto input = get_or<std::string>(cfg, "input", "");
  if (input.empty()) throw ConfigError("transform needs an 'input' point-process CSV");
  const auto pts = read_points_csv(input);
  const auto f0 = density_or(cfg, "f0");
  const auto n = get_or<std::size_t>(cfg, "n", 0);
  if (n < 2) throw ConfigError("transform needs n >= 2");
  const auto beta = get_or(cfg, "beta", f0.beta());
  const auto p = build_partition(f0, n, beta);
  const int J = o.jmax ? *o.jmax : get_or(cfg, "jmax", default_jmax(p, f0.radius(), get_or(cfg, "jmax_cap", 10)));
  if (J < 0 || J > 24) throw ConfigError("jmax must lie in [0, 24]");
  const auto counts = bin_counts(pts, p, J);
  const auto st = quantile_transform(counts, J, seed);
  const auto dir = out_dir(o);
  write_coeffs_csv((dir / "transformed.csv").string(), st.z);
  write_counts_csv((dir / "counts.csv").string(), counts);

  bool exact = false;
  std::string why;
  try {
    exact = invert_transform(st) == counts;
    if (!exact) why = "recovered counts differ";
  } catch (const NumericalError& e) {
    why = e.what();
  }

  // Per-level summary of the transformed coefficients.
  {
    std::ofstream os(dir / "levels.csv");
    os << "j,count,mean,variance\n";
    for (int j = 0; j <= J; ++j) {
      double s = 0, s2 = 0, c = 0;
      for (std::size_t i = 0; i < p.m(); ++i)
        for (std::size_t k = 0; k < (std::size_t{1} << j); ++k) {
          const double z = st.z.at(i, j, k);
          s += z, s2 += z * z, c += 1;
        }
      const double mean = s / c;
      os << j << ',' << c << ',' << mean << ',' << (c > 1 ? (s2 - c * mean * mean) / (c - 1) : 0.0) << '\n';
    }
  }

  json man = manifest("transform", cfg, seed, o);
  man["jmax"] = J;
  man["m"] = p.m();
  man["points"] = pts.size();
  if (get_or(cfg, "gaussian_reference", false)) {
    const auto prof = step_approx(f0, p);
    const auto y = sample_gwn(f0, n, haar_grid(p, J + 1), VarianceMode::Step, &prof, derive_seed(seed, 0x6e7));
    write_coeffs_csv((dir / "gaussian_reference.csv").string(), gwn_to_coeffs(y, p, f0, J));
  }
  json check{{"exact", exact}};
  if (!exact) check["reason"] = why;
  write_json(dir / "inverse_check.json", check);
  write_json(dir / "manifest.json", man);
  if (!exact) {
    std::cerr << "inversion mismatch: " << why << '\n';
    return 1;
  }
  return 0;
}

int cmd_rate(const Common& o) {
  const json cfg = load_config(o.config);
  const auto seed = seed_of(o, cfg);
  const auto f = density_or(cfg, "density", uniform_density());
  const auto f0 = density_or(cfg, "f0", f);
  const auto beta = get_or(cfg, "beta", f0.beta());
  const auto ns = n_grid(cfg);
  const auto study = get_or<std::string>(cfg, "study", "coupling");
  RateStudy rs;
  if (study == "coupling") {
    BudgetOptions bo;
    bo.seed = seed;
    bo.jmax = o.jmax ? *o.jmax : get_or(cfg, "jmax", -1);
    bo.jmax_cap = get_or(cfg, "jmax_cap", 10);
    bo.draws = o.reps ? *o.reps : get_or<std::size_t>(cfg, "draws", 256);
    rs = rate_study(f, f0, ns, beta, bo);
  } else if (study == "poissonization") {
    rs = poissonization_study(f0, ns, beta, get_or(cfg, "C", 1.0));
  } else {
    throw ConfigError("unknown study '" + study + "'");
  }
  const auto dir = out_dir(o);
  {
    std::ofstream os(dir / "rate.csv");
    if (!os) throw ConfigError("cannot write rate.csv");
    os.precision(12);
    os << "n,hellinger_budget,error,m_n,I_n\n";
    for (const auto& pt : rs.points) os << pt.n << ',' << pt.value << ',' << pt.error << ',' << pt.m << ',' << pt.In << '\n';
  }
  json man = manifest("rate", cfg, seed, o);
  man["fit"] = {{"slope", rs.fit.slope},
                {"intercept", rs.fit.intercept},
                {"slope_se", rs.fit.slope_se},
                {"ci95", {rs.fit.ci_low, rs.fit.ci_high}}};
  write_json(dir / "manifest.json", man);
  std::cout << "slope " << rs.fit.slope << " [" << rs.fit.ci_low << ", " << rs.fit.ci_high << "]\n";
  return 0;
}

int cmd_pretest(const Common& o) {
  const json cfg = load_config(o.config);
  const auto seed = seed_of(o, cfg);
  const auto beta = get_or(cfg, "beta", 1.0);
  std::size_t n = get_or<std::size_t>(cfg, "n", 0);
  std::optional<DensityModel> fhat;
  if (cfg.contains("input")) {
    const auto pts = read_points_csv(cfg.at("input").get<std::string>());
    if (n == 0) n = pts.size();
    fhat = two_stage_estimate(pts, n, beta).estimate;
  } else {
    fhat = density_or(cfg, "fhat");
  }
  if (n < 1) throw ConfigError("pretest needs n >= 1");
  const double In = pretest_In(*fhat, n, beta);
  const auto dir = out_dir(o);
  json man = manifest("pretest", cfg, seed, o);
  man["I_n"] = In;
  write_json(dir / "pretest.json", json{{"n", n}, {"beta", beta}, {"I_n", In}});
  write_json(dir / "manifest.json", man);
  std::cout << "I_n " << In << '\n';
  return 0;
}

int cmd_lowerbound(const Common& o) {
  const json cfg = load_config(o.config);
  const auto seed = seed_of(o, cfg);
  const auto f0 = density_or(cfg, "f0", uniform_density());
  const auto beta = get_or(cfg, "beta", 1.0);
  const auto alpha = get_or(cfg, "alpha", 0.3);
  const auto sign = get_or(cfg, "prior_sign", 1);
  const auto cells = get_or<std::size_t>(cfg, "cells_per_interval", 64);
  std::vector<std::size_t> ns = cfg.contains("n") && cfg.at("n").is_number()
                                    ? std::vector<std::size_t>{cfg.at("n").get<std::size_t>()}
                                    : get_or<std::vector<std::size_t>>(cfg, "n", {4096});
  GapOptions go;
  go.reps = o.reps ? *o.reps : get_or<std::size_t>(cfg, "reps", 10000);
  go.seed = seed;
  if (cfg.contains("A")) go.A_override = cfg.at("A").get<double>();
  const auto dir = out_dir(o);
  json man = manifest("lowerbound", cfg, seed, o);
  man["kits"] = json::array();
  std::ofstream os(dir / "gap.csv");
  if (!os) throw ConfigError("cannot write gap.csv");
  os.precision(12);
  os << "n,alpha,gap,std_err,target_scale\n";
  for (std::size_t n : ns) {
    const auto kit = build_kit(f0, n, beta, alpha, cells);
    if (!kit.admissible) throw ConfigError("alpha too large: sup |sum psi| >= 1/2 at n = " + std::to_string(n));
    const auto r = bayes_risk_gap(kit, sign, go);
    os << n << ',' << alpha << ',' << r.gap << ',' << r.se << ',' << r.target_scale << '\n';
    json k = to_json(r);
    k["n"] = n;
    k["m"] = kit.m();
    k["sup_perturbation"] = kit.sup_perturbation;
    k["window"] = {r.loss.j1 + 1, r.loss.j2};
    man["kits"].push_back(k);
    std::cout << "n " << n << " gap " << r.gap << " +- " << r.se << '\n';
  }
  write_json(dir / "manifest.json", man);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lecam: couplings, estimators and lower-bound experiments"};
  app.require_subcommand(1);
  Common o;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "JSON config");
    s->add_option("--seed", o.seed, "master seed");
    s->add_option("--out", o.out, "output directory");
    s->add_option("--jmax", o.jmax, "finest Haar level");
    s->add_option("--reps", o.reps, "replicates");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Common&);
  };
  const Cmd cmds[] = {{"simulate", "draw from an experiment", cmd_simulate},
                      {"transform", "quantile transform of a point process", cmd_transform},
                      {"rate", "coupling or Poissonization rate study", cmd_rate},
                      {"pretest", "pre-test statistic I_n", cmd_pretest},
                      {"lowerbound", "Bayes-risk gap study", cmd_lowerbound}};
  int (*run)(const Common&) = nullptr;
  for (const auto& c : cmds) {
    auto* s = app.add_subcommand(c.name, c.help);
    add_common(s);
    s->callback([&run, fn = c.fn] { run = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    return run(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
