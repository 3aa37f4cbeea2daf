#include "latentdyad/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "latentdyad/draw_io.hpp"
#include "latentdyad/error.hpp"

namespace latentdyad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& target, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& target, const std::string& where) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    target.reset();
    return;
  }
  T value{};
  read_key(j, key, value, where);
  target = value;
}

double clamped_logit(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("generator probabilities must lie in [0, 1]");
  constexpr double kLimit = 1e4;
  if (p == 0.0) return -kLimit;
  if (p == 1.0) return kLimit;
  return std::clamp(std::log(p) - std::log1p(-p), -kLimit, kLimit);
}

std::string singleton_name(SingletonPolicy p) {
  return p == SingletonPolicy::RetainAsAuxiliary ? "retain" : "printed";
}

SingletonPolicy parse_singleton(const std::string& s) {
  if (s == "retain") return SingletonPolicy::RetainAsAuxiliary;
  if (s == "printed") return SingletonPolicy::PrintedExtraCandidate;
  throw ConfigError("sampler.singleton must be 'retain' or 'printed'");
}

std::string escobar_west_name(EscobarWestForm f) { return f == EscobarWestForm::Canonical ? "canonical" : "printed"; }

EscobarWestForm parse_escobar_west(const std::string& s) {
  if (s == "canonical") return EscobarWestForm::Canonical;
  if (s == "printed") return EscobarWestForm::AsPrinted;
  throw ConfigError("hyperprior.escobar_west must be 'canonical' or 'printed'");
}

std::string clustering_name(ClusteringMode m) {
  return m == ClusteringMode::Transitivity ? "transitivity" : "mean_local";
}

ClusteringMode parse_clustering(const std::string& s) {
  if (s == "transitivity") return ClusteringMode::Transitivity;
  if (s == "mean_local") return ClusteringMode::MeanLocal;
  throw ConfigError("ppc.clustering must be 'transitivity' or 'mean_local'");
}

ModelVariant variant_from(const std::string& s) {
  try {
    return parse_variant(s);
  } catch (const std::exception&) {
    throw ConfigError("variant must be one of baseline, hmcr, full (got '" + s + "')");
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out(const RunConfig& config) {
  if (config.out.empty()) throw ConfigError("an output directory is required (--out)");
  fs::path dir(config.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void echo_config(const fs::path& dir, const RunConfig& config, const std::string& command) {
  json j = config.to_json();
  j["command"] = command;
  write_json(dir / "config.json", j);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

struct LoadedData {
  IngestResult ingest;
  ObservationWindow span;
};

LoadedData load_input(const RunConfig& config) {
  require_file(config.input, "input CSV (--input)");
  std::ifstream in(config.input);
  if (!in) throw DataError("cannot open " + config.input);
  LoadedData data;
  data.ingest = ingest_records(in);
  data.span = config.window.value_or(ObservationWindow{data.ingest.min_week, data.ingest.max_week + 1});
  if (data.span.duration() <= 0) throw ConfigError("observation window is empty");
  return data;
}

WindowSplit load_split(const RunConfig& config, LoadedData& data) {
  if (!config.boundary_week) throw ConfigError("this command needs --boundary-week");
  return split_windows(data.ingest.records, data.ingest.n_individuals, data.span, *config.boundary_week);
}

std::string draws_path(const RunConfig& config) {
  if (!config.draws.empty()) return config.draws;
  return (fs::path(config.out) / "draws.jsonl").string();
}

std::vector<PosteriorDraw> load_draws(const RunConfig& config, std::size_t expected_n) {
  const auto path = draws_path(config);
  require_file(path, "draw file");
  auto draws = read_draw_file(path);
  if (draws.empty()) throw DataError("draw file holds no draws: " + path);
  if (expected_n != 0) {
    for (const auto& d : draws) {
      if (d.assignment.size() != expected_n) {
        throw DataError("draw file covers " + std::to_string(d.assignment.size()) + " individuals, data has " +
                        std::to_string(expected_n));
      }
    }
  }
  return draws;
}

std::vector<PosteriorDraw> thin_evenly(const std::vector<PosteriorDraw>& draws, std::size_t max_count) {
  if (max_count == 0 || draws.size() <= max_count) return draws;
  std::vector<PosteriorDraw> out;
  out.reserve(max_count);
  for (std::size_t t = 0; t < max_count; ++t) out.push_back(draws[(t * draws.size()) / max_count]);
  return out;
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::string svg_scatter(const PosteriorDraw& draw, const std::vector<std::array<double, 2>>& points,
                        const DyadTable* edges) {
  constexpr double kSize = 640.0, kMargin = 30.0;
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;
  for (const auto& p : points) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
  auto sx = [&](double x) { return kMargin + (x - lo_x) / span * (kSize - 2 * kMargin); };
  auto sy = [&](double y) { return kSize - kMargin - (y - lo_y) / span * (kSize - 2 * kMargin); };
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"12\">sweep " << draw.sweep << ", k = "
     << draw.k() << ", N = " << points.size() << "</text>\n";
  if (edges) {
    os << "<g stroke=\"#4477aa\" stroke-opacity=\"0.15\" stroke-width=\"0.5\">\n";
    for (const auto& [key, y] : edges->nonempty()) {
      os << "<line x1=\"" << sx(points[key.i][0]) << "\" y1=\"" << sy(points[key.i][1]) << "\" x2=\""
         << sx(points[key.j][0]) << "\" y2=\"" << sy(points[key.j][1]) << "\"/>\n";
    }
    os << "</g>\n";
  }
  os << "<g fill=\"black\" fill-opacity=\"0.6\">\n";
  for (const auto& p : points) os << "<circle cx=\"" << sx(p[0]) << "\" cy=\"" << sy(p[1]) << "\" r=\"2\"/>\n";
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace

nlohmann::json GeneratorSpec::to_json() const {
  json clusters_json = json::array();
  for (const auto& c : clusters) clusters_json.push_back({{"center", c.center}, {"size", c.size}});
  return {{"clusters", clusters_json},
          {"n", n},
          {"alpha", alpha},
          {"kappa", kappa},
          {"dim", dim},
          {"variant", std::string(to_string(params.variant))},
          {"xi", params_to_json(params)},
          {"weeks", weeks}};
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& j) {
  const std::string where = "generator";
  check_keys(j, {"clusters", "n", "alpha", "kappa", "dim", "variant", "xi", "weeks", "p_within", "p_between"}, where);
  GeneratorSpec g;
  read_key(j, "n", g.n, where);
  read_key(j, "alpha", g.alpha, where);
  read_key(j, "kappa", g.kappa, where);
  read_key(j, "dim", g.dim, where);
  read_key(j, "weeks", g.weeks, where);
  if (j.contains("variant")) g.params.variant = variant_from(j.at("variant").get<std::string>());
  if (j.contains("clusters")) {
    if (!j.at("clusters").is_array()) throw ConfigError("generator.clusters must be an array");
    for (const auto& c : j.at("clusters")) {
      check_keys(c, {"center", "size"}, "generator.clusters[]");
      GeneratorCluster gc;
      read_key(c, "center", gc.center, "generator.clusters[]");
      read_key(c, "size", gc.size, "generator.clusters[]");
      g.clusters.push_back(std::move(gc));
    }
    if (!g.clusters.empty()) g.dim = g.clusters.front().center.size();
  }
  if (j.contains("xi")) {
    const auto& xi = j.at("xi");
    check_keys(xi, {"beta1p", "beta2p", "beta3p", "beta1mu", "beta2mu", "beta3mu", "v"}, "generator.xi");
    auto& c = g.params.coefficients;
    read_key(xi, "beta1p", c.beta1p, "generator.xi");
    read_key(xi, "beta2p", c.beta2p, "generator.xi");
    read_key(xi, "beta3p", c.beta3p, "generator.xi");
    read_key(xi, "beta1mu", c.beta1mu, "generator.xi");
    read_key(xi, "beta2mu", c.beta2mu, "generator.xi");
    read_key(xi, "beta3mu", c.beta3mu, "generator.xi");
    read_key(xi, "v", g.params.v, "generator.xi");
  }
  // Two-level shortcut: p_within at distance 0, p_between at the closest pair of centres.
  if (j.contains("p_within") || j.contains("p_between")) {
    if (!(j.contains("p_within") && j.contains("p_between"))) {
      throw ConfigError("generator needs both p_within and p_between");
    }
    if (g.clusters.size() < 2) throw ConfigError("p_within/p_between need at least two clusters");
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < g.clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < g.clusters.size(); ++b) {
        double d2 = 0.0;
        for (std::size_t t = 0; t < g.dim && t < g.clusters[b].center.size(); ++t) {
          const double diff = g.clusters[a].center[t] - g.clusters[b].center[t];
          d2 += diff * diff;
        }
        closest = std::min(closest, std::sqrt(d2));
      }
    }
    if (!(closest > 0.0)) throw ConfigError("cluster centres must be distinct");
    const double lw = clamped_logit(j.at("p_within").get<double>());
    const double lb = clamped_logit(j.at("p_between").get<double>());
    if (lb > lw) throw ConfigError("p_between must not exceed p_within");
    auto& c = g.params.coefficients;
    c.beta1p = lw;
    c.beta2p = (lw - lb) / closest;
    c.beta3p = 1.0;
    if (g.params.variant == ModelVariant::Baseline) g.params.variant = ModelVariant::Hmcr;
  }
  if (g.dim < 2) throw ConfigError("generator.dim must be at least 2");
  if (g.weeks <= 0) throw ConfigError("generator.weeks must be positive");
  for (const auto& c : g.clusters) {
    if (c.center.size() != g.dim) throw ConfigError("generator cluster centres must share one dimension");
  }
  if (!(g.params.v > 0.0)) throw ConfigError("generator.xi.v must be positive");
  return g;
}

SimulatedNetwork simulate_records(const GeneratorSpec& spec, Rng& rng) {
  SimulatedNetwork sim;
  sim.params = spec.params;
  if (!spec.clusters.empty()) {
    std::size_t n = 0;
    for (const auto& c : spec.clusters) n += c.size;
    sim.clusters = ClusterTable(n, spec.dim);
    std::size_t next = 0;
    for (const auto& c : spec.clusters) {
      if (c.size == 0) continue;
      const auto site = sim.clusters.assign_new(next++, LatentCoordinate(c.center));
      for (std::size_t t = 1; t < c.size; ++t) sim.clusters.assign(next++, site);
    }
  } else {
    if (spec.n < 2) throw ConfigError("generator.n must be at least 2");
    sim.clusters = ClusterTable(spec.n, spec.dim);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < spec.n; ++i) {
      // Sequential CRP seating.
      const double u = unit(rng) * (static_cast<double>(i) + spec.alpha);
      if (u < spec.alpha || i == 0) {
        sim.clusters.assign_new(i, sample_h0(spec.kappa, spec.dim, rng));
      } else {
        const auto pick = std::min<std::size_t>(static_cast<std::size_t>(u - spec.alpha), i - 1);
        sim.clusters.assign(i, sim.clusters.site_of(pick));
      }
    }
  }
  sim.table = simulate_network(sim.clusters, sim.params, spec.weeks, rng);
  std::uniform_int_distribution<int> week(0, spec.weeks - 1);
  std::bernoulli_distribution flip(0.5);
  for (const auto& [key, y] : sim.table.nonempty()) {
    for (std::uint32_t c = 0; c < y; ++c) {
      const bool swap = flip(rng);
      sim.records.push_back({swap ? key.j : key.i, swap ? key.i : key.j, week(rng)});
    }
  }
  std::sort(sim.records.begin(), sim.records.end(), [](const InteractionRecord& a, const InteractionRecord& b) {
    return std::tie(a.week, a.a, a.b) < std::tie(b.week, b.a, b.b);
  });
  return sim;
}

void ExportOptions::validate() const {
  if (!(jitter_half_width >= 0.0)) throw ConfigError("export.jitter_half_width must be nonnegative");
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j,
             {"input", "out", "draws", "seed", "threads", "variant", "boundary_week", "window", "sampler",
              "hyperprior", "generator", "export", "ppc", "predict", "scaling"},
             "config");
  RunConfig c;
  read_key(j, "input", c.input, "config");
  read_key(j, "out", c.out, "config");
  read_key(j, "draws", c.draws, "config");
  read_key(j, "seed", c.seed, "config");
  read_key(j, "threads", c.threads, "config");
  read_optional(j, "boundary_week", c.boundary_week, "config");
  if (j.contains("variant")) c.sampler.variant = variant_from(j.at("variant").get<std::string>());
  if (j.contains("window") && !j.at("window").is_null()) {
    const auto& w = j.at("window");
    check_keys(w, {"start", "end"}, "window");
    ObservationWindow win;
    read_key(w, "start", win.start_week, "window");
    read_key(w, "end", win.end_week, "window");
    c.window = win;
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    const std::string where = "sampler";
    check_keys(s,
               {"dim", "m", "sweeps", "burn_in", "thin", "step_scale", "adapt_step", "target_acceptance", "xi_steps",
                "sir_pool", "initial_kappa", "singleton", "flat_likelihood"},
               where);
    auto& sc = c.sampler;
    read_key(s, "dim", sc.dim, where);
    read_key(s, "m", sc.m, where);
    read_key(s, "sweeps", sc.sweeps, where);
    read_key(s, "burn_in", sc.burn_in, where);
    read_key(s, "thin", sc.thin, where);
    read_key(s, "step_scale", sc.step_scale, where);
    read_key(s, "adapt_step", sc.adapt_step, where);
    read_key(s, "target_acceptance", sc.target_acceptance, where);
    read_key(s, "xi_steps", sc.xi_steps, where);
    read_key(s, "sir_pool", sc.sir_pool, where);
    read_key(s, "initial_kappa", sc.initial_kappa, where);
    read_key(s, "flat_likelihood", sc.flat_likelihood, where);
    if (s.contains("singleton")) sc.singleton = parse_singleton(s.at("singleton").get<std::string>());
  }
  if (j.contains("hyperprior")) {
    const auto& h = j.at("hyperprior");
    const std::string where = "hyperprior";
    check_keys(h,
               {"alpha_shape", "alpha_rate", "kappa_shape", "kappa_rate", "xi_mean", "xi_variance", "fixed_alpha",
                "escobar_west"},
               where);
    auto& hc = c.hyper;
    read_key(h, "alpha_shape", hc.alpha_shape, where);
    read_key(h, "alpha_rate", hc.alpha_rate, where);
    read_key(h, "kappa_shape", hc.kappa_shape, where);
    read_key(h, "kappa_rate", hc.kappa_rate, where);
    read_key(h, "xi_mean", hc.xi_mean, where);
    read_key(h, "xi_variance", hc.xi_variance, where);
    read_optional(h, "fixed_alpha", hc.fixed_alpha, where);
    if (h.contains("escobar_west")) hc.escobar_west = parse_escobar_west(h.at("escobar_west").get<std::string>());
  }
  if (j.contains("generator")) c.generator = GeneratorSpec::from_json(j.at("generator"));
  if (j.contains("export")) {
    const auto& e = j.at("export");
    const std::string where = "export";
    check_keys(e, {"jitter", "jitter_half_width", "svg", "edges", "sweep"}, where);
    read_key(e, "jitter", c.export_options.jitter, where);
    read_key(e, "jitter_half_width", c.export_options.jitter_half_width, where);
    read_key(e, "svg", c.export_options.svg, where);
    read_key(e, "edges", c.export_options.edges, where);
    read_optional(e, "sweep", c.export_options.sweep, where);
  }
  if (j.contains("ppc")) {
    const auto& p = j.at("ppc");
    check_keys(p, {"replicates", "clustering"}, "ppc");
    read_key(p, "replicates", c.ppc.replicates, "ppc");
    if (p.contains("clustering")) c.ppc.clustering = parse_clustering(p.at("clustering").get<std::string>());
  }
  if (j.contains("predict")) {
    const auto& p = j.at("predict");
    check_keys(p, {"q_percents", "horizon", "write_scores", "max_draws"}, "predict");
    read_key(p, "q_percents", c.predict.q_percents, "predict");
    read_optional(p, "horizon", c.predict.horizon, "predict");
    read_key(p, "write_scores", c.predict.write_scores, "predict");
    read_key(p, "max_draws", c.predict.max_draws, "predict");
  }
  if (j.contains("scaling")) {
    const auto& s = j.at("scaling");
    check_keys(s, {"alphas", "sizes"}, "scaling");
    read_key(s, "alphas", c.scaling.alphas, "scaling");
    read_key(s, "sizes", c.scaling.sizes, "scaling");
  }
  c.sampler.seed = c.seed;
  return c;
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["input"] = input;
  j["out"] = out;
  j["draws"] = draws;
  j["seed"] = seed;
  j["threads"] = threads;
  j["variant"] = std::string(to_string(sampler.variant));
  j["boundary_week"] = boundary_week ? json(*boundary_week) : json(nullptr);
  j["window"] = window ? json{{"start", window->start_week}, {"end", window->end_week}} : json(nullptr);
  j["sampler"] = {{"dim", sampler.dim},
                  {"m", sampler.m},
                  {"sweeps", sampler.sweeps},
                  {"burn_in", sampler.burn_in},
                  {"thin", sampler.thin},
                  {"step_scale", sampler.step_scale},
                  {"adapt_step", sampler.adapt_step},
                  {"target_acceptance", sampler.target_acceptance},
                  {"xi_steps", sampler.xi_steps},
                  {"sir_pool", sampler.sir_pool},
                  {"initial_kappa", sampler.initial_kappa},
                  {"singleton", singleton_name(sampler.singleton)},
                  {"flat_likelihood", sampler.flat_likelihood}};
  j["hyperprior"] = {{"alpha_shape", hyper.alpha_shape},
                     {"alpha_rate", hyper.alpha_rate},
                     {"kappa_shape", hyper.kappa_shape},
                     {"kappa_rate", hyper.kappa_rate},
                     {"xi_mean", hyper.xi_mean},
                     {"xi_variance", hyper.xi_variance},
                     {"fixed_alpha", hyper.fixed_alpha ? json(*hyper.fixed_alpha) : json(nullptr)},
                     {"escobar_west", escobar_west_name(hyper.escobar_west)}};
  j["generator"] = generator.to_json();
  j["export"] = {{"jitter", export_options.jitter},
                 {"jitter_half_width", export_options.jitter_half_width},
                 {"svg", export_options.svg},
                 {"edges", export_options.edges},
                 {"sweep", export_options.sweep ? json(*export_options.sweep) : json(nullptr)}};
  j["ppc"] = {{"replicates", ppc.replicates}, {"clustering", clustering_name(ppc.clustering)}};
  j["predict"] = {{"q_percents", predict.q_percents},
                  {"horizon", predict.horizon ? json(*predict.horizon) : json(nullptr)},
                  {"write_scores", predict.write_scores},
                  {"max_draws", predict.max_draws}};
  j["scaling"] = {{"alphas", scaling.alphas}, {"sizes", scaling.sizes}};
  return j;
}

void RunConfig::validate() const {
  sampler.validate();
  hyper.validate();
  export_options.validate();
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (ppc.replicates < 1) throw ConfigError("ppc.replicates must be at least 1");
  for (double q : predict.q_percents) {
    if (!(q > 0.0 && q < 100.0)) throw ConfigError("Q percentages must lie in (0, 100)");
  }
  if (predict.horizon && !(*predict.horizon >= 0.0)) throw ConfigError("predict.horizon must be nonnegative");
  for (double a : scaling.alphas) {
    if (!(a > 0.0)) throw ConfigError("scaling alphas must be positive");
  }
}

RunConfig resolve_config(const CliOverrides& o) {
  json doc = json::object();
  if (o.config) {
    require_file(*o.config, "config file");
    std::ifstream in(*o.config);
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse config " + *o.config + ": " + e.what());
    }
  }
  RunConfig c = RunConfig::from_json(doc);
  if (o.input) c.input = *o.input;
  if (o.out) c.out = *o.out;
  if (o.seed) c.seed = c.sampler.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.variant) c.sampler.variant = variant_from(*o.variant);
  if (o.boundary_week) c.boundary_week = *o.boundary_week;
  if (o.fixed_alpha) c.hyper.fixed_alpha = *o.fixed_alpha;
  if (!o.q_percents.empty()) c.predict.q_percents = o.q_percents;
  c.validate();
  return c;
}

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  const auto dir = prepare_out(config);
  Rng rng(config.seed);
  const auto sim = simulate_records(config.generator, rng);
  const std::size_t n = sim.clusters.n_individuals();

  std::ostringstream csv;
  csv << "caller_id,callee_id,week\n";
  for (const auto& r : sim.records) csv << r.a << ',' << r.b << ',' << r.week << '\n';
  write_text(dir / "records.csv", csv.str());

  json sites = json::array();
  for (const auto& s : sim.clusters.sites()) sites.push_back(std::vector<double>(s.values().begin(), s.values().end()));
  std::vector<std::size_t> assignment(n);
  for (std::size_t i = 0; i < n; ++i) assignment[i] = sim.clusters.site_of(i);
  write_json(dir / "truth.json", {{"n_individuals", n},
                                  {"weeks", config.generator.weeks},
                                  {"variant", std::string(to_string(sim.params.variant))},
                                  {"xi", params_to_json(sim.params)},
                                  {"sites", sites},
                                  {"assignment", assignment},
                                  {"nonempty_dyads", sim.table.n_nonempty()},
                                  {"contacts", sim.table.total_contacts()}});

  std::ostringstream dyads;
  dyads << std::setprecision(17) << "i,j,distance,p,mu\n";
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = latent_distance(sim.clusters.coordinate_of(i), sim.clusters.coordinate_of(j));
      const auto dp = dyad_params(d, sim.params);
      dyads << i << ',' << j << ',' << d << ',' << dp.p << ',' << dp.mu << '\n';
    }
  }
  write_text(dir / "truth_dyads.csv", dyads.str());
  echo_config(dir, config, "simulate");
  log << "simulated " << n << " individuals, " << sim.clusters.k() << " sites, " << sim.table.n_nonempty()
      << " nonempty dyads, " << sim.records.size() << " contacts over " << config.generator.weeks << " weeks\n";
  return kExitOk;
}

int cmd_fit(const RunConfig& config, std::ostream& log) {
  auto data = load_input(config);
  const auto dir = prepare_out(config);
  DyadTable table;
  if (config.boundary_week) {
    table = load_split(config, data).calibration;
  } else {
    table = build_dyad_table(data.ingest.records, data.ingest.n_individuals, data.span);
  }
  const ChainOutput chain = run_chain(table, config.sampler, config.hyper);
  write_draw_file(draws_path(config), chain.draws);

  std::ostringstream ids;
  ids << "index,id\n";
  for (std::size_t i = 0; i < data.ingest.ids.size(); ++i) ids << i << ',' << data.ingest.ids[i] << '\n';
  write_text(dir / "ids.csv", ids.str());

  write_json(dir / "summary.json", {{"variant", std::string(to_string(chain.variant))},
                                    {"dim", chain.dim},
                                    {"n_individuals", chain.n_individuals},
                                    {"n_nonempty", table.n_nonempty()},
                                    {"window", {{"start", table.window().start_week}, {"end", table.window().end_week}}},
                                    {"stored_draws", chain.draws.size()},
                                    {"acceptance_rate", chain.acceptance_rate()},
                                    {"final_step_scale", chain.final_step_scale},
                                    {"mean_k", chain.mean_k()},
                                    {"mean_eval_count", chain.mean_eval_count()},
                                    {"n_dyads", table.n_dyads()},
                                    {"wall_seconds", chain.wall_seconds},
                                    {"k_trace", chain.k_trace}});
  echo_config(dir, config, "fit");
  log << "fit " << to_string(chain.variant) << ": N=" << chain.n_individuals << ", " << chain.draws.size()
      << " draws, mean k " << fmt(chain.mean_k(), 2) << ", mean evaluations " << fmt(chain.mean_eval_count(), 1)
      << ", acceptance " << fmt(chain.acceptance_rate(), 3) << ", " << fmt(chain.wall_seconds, 1) << " s\n";
  return kExitOk;
}

int cmd_stats(const RunConfig& config, std::ostream& log) {
  auto data = load_input(config);
  const auto dir = prepare_out(config);
  const auto split = load_split(config, data);
  const auto full = build_dyad_table(data.ingest.records, data.ingest.n_individuals, data.span);
  const auto report = descriptive_report(split.calibration, split.holdout, full, config.ppc.clustering);
  json j = report.to_json();
  const auto t = dyad_transition_counts(split.calibration, split.holdout);
  j["transitions"] = {{"nonempty_to_nonempty", t.nonempty_to_nonempty},
                      {"nonempty_to_empty", t.nonempty_to_empty},
                      {"empty_to_nonempty", t.empty_to_nonempty},
                      {"empty_to_empty", t.empty_to_empty}};
  const double kbar = report.columns.back().degree.mean;
  if (kbar > 1.0 && full.n_individuals() >= 2) {
    const auto e = random_graph_expectations(full.n_individuals(), kbar);
    j["random_graph"] = {{"mean_degree", kbar},
                         {"geodesic", e.geodesic},
                         {"clustering", e.clustering},
                         {"approximation_valid", e.approximation_valid}};
  }
  write_json(dir / "stats.json", j);
  write_text(dir / "stats.txt", report.to_text());
  echo_config(dir, config, "stats");
  log << report.to_text();
  return kExitOk;
}

int cmd_ppc(const RunConfig& config, std::ostream& log) {
  auto data = load_input(config);
  const auto dir = prepare_out(config);
  const auto split = load_split(config, data);
  const auto draws = load_draws(config, data.ingest.n_individuals);
  PpcOptions options;
  options.replicates = config.ppc.replicates;
  options.seed = config.seed;
  options.clustering = config.ppc.clustering;
  options.threads = config.threads;
  const auto report = run_ppc(draws, split.holdout, options);
  write_json(dir / "ppc.json", report.to_json());
  write_text(dir / "ppc.csv", report.to_csv());
  echo_config(dir, config, "ppc");
  log << "ppc: " << report.replicates << " replicates, " << fmt(100.0 * report.fraction_inside(), 1)
      << "% of informative bins inside the 95% envelope\n";
  if (const auto* c = report.find("clustering")) {
    log << "clustering observed " << fmt(c->observed) << ", envelope [" << fmt(c->envelope.q025) << ", "
        << fmt(c->envelope.q975) << "]" << (c->inside ? "" : " (outside)") << '\n';
  }
  return kExitOk;
}

int cmd_predict(const RunConfig& config, std::ostream& log) {
  auto data = load_input(config);
  const auto dir = prepare_out(config);
  const auto split = load_split(config, data);
  const auto draws = thin_evenly(load_draws(config, data.ingest.n_individuals), config.predict.max_draws);
  const double horizon = config.predict.horizon.value_or(split.holdout.duration());
  const std::size_t n = data.ingest.n_individuals;

  const ConstantScorer random(n);
  const ConditionOnObservedScorer observed(split.calibration);
  const GeodesicScorer geo_random(split.calibration, GeodesicTiebreak::Random);
  const GeodesicScorer geo_calls(split.calibration, GeodesicTiebreak::CallVolume);
  const ModelScorer model(draws, split.calibration.duration(), horizon);
  const std::vector<const DyadScorer*> scorers = {&random, &observed, &geo_random, &geo_calls, &model};
  const auto report = lift_report(split.calibration, split.holdout, scorers, config.predict.q_percents, config.seed);
  write_json(dir / "lift.json", report.to_json());
  write_text(dir / "lift.csv", report.to_csv());

  if (config.predict.write_scores) {
    std::ofstream out(dir / "scores.csv");
    if (!out) throw DataError("cannot write scores.csv");
    out << std::setprecision(10) << "caller_id,callee_id,score,holdout_contacts\n";
    std::vector<Score> row;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      model.score_row(static_cast<IndividualId>(i), row);
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto a = static_cast<IndividualId>(i), b = static_cast<IndividualId>(j);
        if (split.calibration.count(a, b) > 0) continue;
        out << data.ingest.ids[i] << ',' << data.ingest.ids[j] << ',' << row[j].primary << ','
            << split.holdout.count(a, b) << '\n';
      }
    }
  }
  echo_config(dir, config, "predict");
  log << "lift (micro) by Q%:\n";
  for (std::size_t s = 0; s < report.scorers.size(); ++s) {
    log << "  " << std::left << std::setw(28) << report.scorers[s];
    for (const auto& r : report.results[s]) log << "  Q=" << r.q_percent << "%: " << fmt(r.micro);
    log << '\n';
  }
  return kExitOk;
}

int cmd_export(const RunConfig& config, std::ostream& log) {
  const auto& opt = config.export_options;
  std::optional<LoadedData> data;
  if (!config.input.empty()) data = load_input(config);
  if (opt.edges && !data) throw ConfigError("the edge overlay needs --input");
  const auto dir = prepare_out(config);
  const auto draws = load_draws(config, data ? data->ingest.n_individuals : 0);

  const PosteriorDraw* chosen = nullptr;
  if (opt.sweep) {
    for (const auto& d : draws) {
      if (d.sweep == *opt.sweep) chosen = &d;
    }
    if (!chosen) throw ConfigError("no stored draw at sweep " + std::to_string(*opt.sweep));
  } else {
    chosen = &*std::max_element(draws.begin(), draws.end(),
                                [](const PosteriorDraw& a, const PosteriorDraw& b) { return a.loglik < b.loglik; });
  }
  const std::size_t dim = chosen->sites.empty() ? 0 : chosen->sites.front().dim();
  if (opt.svg && dim != 2) {
    throw ConfigError("SVG export supports D = 2 only; this draw has D = " + std::to_string(dim) +
                      ", use the CSV export instead");
  }

  Rng rng(config.seed);
  std::uniform_real_distribution<double> noise(-opt.jitter_half_width, opt.jitter_half_width);
  const std::size_t n = chosen->assignment.size();
  std::ostringstream csv;
  csv << std::setprecision(17) << "individual";
  for (std::size_t t = 0; t < dim; ++t) csv << ",x" << t + 1;
  csv << ",site\n";
  std::vector<std::array<double, 2>> points(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto site = chosen->assignment[i];
    csv << (data ? data->ingest.ids[i] : std::to_string(i));
    for (std::size_t t = 0; t < dim; ++t) {
      double x = chosen->sites[site][t];
      if (opt.jitter) x += noise(rng);
      if (t < 2) points[i][t] = x;
      csv << ',' << x;
    }
    csv << ',' << site << '\n';
  }
  write_text(dir / "coordinates.csv", csv.str());
  if (opt.svg) {
    std::optional<DyadTable> edges;
    if (opt.edges) edges = build_dyad_table(data->ingest.records, data->ingest.n_individuals, data->span);
    write_text(dir / "coordinates.svg", svg_scatter(*chosen, points, edges ? &*edges : nullptr));
  }
  echo_config(dir, config, "export");
  log << "exported sweep " << chosen->sweep << " (k = " << chosen->k() << ", loglik " << fmt(chosen->loglik, 2)
      << ")\n";
  return kExitOk;
}

int cmd_scaling(const RunConfig& config, std::ostream& log) {
  auto data = load_input(config);
  const auto dir = prepare_out(config);
  const auto table = build_dyad_table(data.ingest.records, data.ingest.n_individuals, data.span);
  const auto rows = scaling_experiment(table, config.scaling.alphas, config.scaling.sizes, config.sampler,
                                       config.hyper);
  std::ostringstream csv;
  csv << std::setprecision(10) << "n,alpha,mean_k,expected_k,mean_evaluations,n_nonempty,n_dyads,reduction\n";
  json j = json::array();
  for (const auto& r : rows) {
    csv << r.n << ',' << r.alpha << ',' << r.mean_k << ',' << r.expected_k << ',' << r.mean_evaluations << ','
        << r.n_nonempty << ',' << r.n_dyads << ',' << r.reduction() << '\n';
    j.push_back({{"n", r.n},
                 {"alpha", r.alpha},
                 {"mean_k", r.mean_k},
                 {"expected_k", r.expected_k},
                 {"mean_evaluations", r.mean_evaluations},
                 {"n_nonempty", r.n_nonempty},
                 {"n_dyads", r.n_dyads},
                 {"reduction", r.reduction()}});
  }
  write_text(dir / "scaling.csv", csv.str());
  write_json(dir / "scaling.json", {{"report", "scaling"}, {"rows", j}});
  echo_config(dir, config, "scaling");
  log << csv.str();
  return kExitOk;
}

int run_command(const std::string& command, const CliOverrides& overrides, std::ostream& log, std::ostream& err) {
  try {
    const RunConfig config = resolve_config(overrides);
    if (command == "simulate") return cmd_simulate(config, log);
    if (command == "fit") return cmd_fit(config, log);
    if (command == "stats") return cmd_stats(config, log);
    if (command == "ppc") return cmd_ppc(config, log);
    if (command == "predict") return cmd_predict(config, log);
    if (command == "export") return cmd_export(config, log);
    if (command == "scaling") return cmd_scaling(config, log);
    throw ConfigError("unknown command '" + command + "'");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Latent-space models of dyadic interaction data with a Dirichlet-process prior"};
  app.require_subcommand(1);
  CliOverrides o;
  std::string config, input, out, variant;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  int boundary = 0;
  double fixed_alpha = 0.0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Simulate a synthetic network from the generator in the config"},
      {"fit", "Run the Gibbs sampler and write posterior draws"},
      {"stats", "Descriptive network statistics for the calibration, holdout and full windows"},
      {"ppc", "Posterior predictive checks of holdout statistics"},
      {"predict", "Score calibration-empty dyads and report lift"},
      {"export", "Write latent coordinates of one draw as CSV and optionally SVG"},
      {"scaling", "Fixed-alpha runs on subsamples: mass points and likelihood evaluations"}};
  app.fallthrough();  // options given after the subcommand belong to the main app
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  auto* o_config = app.add_option("--config", config, "JSON config file");
  auto* o_input = app.add_option("--input", input, "Interaction CSV (caller_id,callee_id,week)");
  auto* o_out = app.add_option("--out", out, "Output directory");
  auto* o_seed = app.add_option("--seed", seed, "Random seed");
  auto* o_threads = app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);
  auto* o_variant = app.add_option("--variant", variant, "Model variant")
                        ->check(CLI::IsMember({"baseline", "hmcr", "full"}));
  auto* o_boundary = app.add_option("--boundary-week", boundary, "First holdout week");
  auto* o_alpha = app.add_option("--fixed-alpha", fixed_alpha, "Hold the concentration parameter fixed");
  app.add_option("--q", o.q_percents, "Lift target share in percent (repeatable)")->allow_extra_args(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (*o_config) o.config = config;
  if (*o_input) o.input = input;
  if (*o_out) o.out = out;
  if (*o_seed) o.seed = seed;
  if (*o_threads) o.threads = threads;
  if (*o_variant) o.variant = variant;
  if (*o_boundary) o.boundary_week = boundary;
  if (*o_alpha) o.fixed_alpha = fixed_alpha;
  const auto* sub = app.get_subcommands().front();
  return run_command(sub->get_name(), o, std::cout, std::cerr);
}

}  // namespace latentdyad
