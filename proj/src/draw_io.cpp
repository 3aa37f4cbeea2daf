#include "latentdyad/draw_io.hpp"

#include <fstream>
#include <limits>
#include <istream>
#include <ostream>

#include "latentdyad/error.hpp"

namespace latentdyad {

nlohmann::json params_to_json(const PopulationParams& params) {
  const auto& c = params.coefficients;
  return {{"beta1p", c.beta1p},   {"beta2p", c.beta2p},   {"beta3p", c.beta3p}, {"beta1mu", c.beta1mu},
          {"beta2mu", c.beta2mu}, {"beta3mu", c.beta3mu}, {"v", params.v}};
}

PopulationParams params_from_json(const nlohmann::json& j, ModelVariant variant) {
  PopulationParams p;
  p.variant = variant;
  auto& c = p.coefficients;
  c.beta1p = j.at("beta1p").get<double>();
  c.beta2p = j.at("beta2p").get<double>();
  c.beta3p = j.at("beta3p").get<double>();
  c.beta1mu = j.at("beta1mu").get<double>();
  c.beta2mu = j.at("beta2mu").get<double>();
  c.beta3mu = j.at("beta3mu").get<double>();
  p.v = j.at("v").get<double>();
  return p;
}

nlohmann::json draw_to_json(const PosteriorDraw& draw) {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : draw.sites) sites.push_back(std::vector<double>(s.values().begin(), s.values().end()));
  return {{"format", kDrawFormat},
          {"sweep", draw.sweep},
          {"variant", std::string(to_string(draw.params.variant))},
          {"alpha", draw.alpha},
          {"kappa", draw.kappa},
          {"k", draw.k()},
          {"xi", params_to_json(draw.params)},
          {"loglik", draw.loglik},
          {"eval_count", draw.eval_count},
          {"sites", std::move(sites)},
          {"occupancy", draw.occupancy},
          {"assignment", draw.assignment}};
}

PosteriorDraw draw_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kDrawFormat) throw DataError("not a latentdyad draw record");
  PosteriorDraw d;
  d.sweep = j.at("sweep").get<std::size_t>();
  d.alpha = j.at("alpha").get<double>();
  d.kappa = j.at("kappa").get<double>();
  d.params = params_from_json(j.at("xi"), parse_variant(j.at("variant").get<std::string>()));
  d.loglik = j.at("loglik").is_null() ? -std::numeric_limits<double>::infinity() : j.at("loglik").get<double>();
  d.eval_count = j.at("eval_count").get<std::size_t>();
  for (const auto& s : j.at("sites")) d.sites.emplace_back(s.get<std::vector<double>>());
  d.occupancy = j.at("occupancy").get<std::vector<std::size_t>>();
  d.assignment = j.at("assignment").get<std::vector<std::uint32_t>>();
  if (d.occupancy.size() != d.sites.size() || j.at("k").get<std::size_t>() != d.sites.size()) {
    throw DataError("draw record has inconsistent site counts");
  }
  return d;
}

void write_draws(std::ostream& out, const std::vector<PosteriorDraw>& draws) {
  for (const auto& d : draws) out << draw_to_json(d).dump() << '\n';
}

std::vector<PosteriorDraw> read_draws(std::istream& in) {
  std::vector<PosteriorDraw> draws;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      draws.push_back(draw_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("draw file line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("draw file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return draws;
}

void write_draw_file(const std::string& path, const std::vector<PosteriorDraw>& draws) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write draw file " + path);
  write_draws(out, draws);
}

std::vector<PosteriorDraw> read_draw_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open draw file " + path);
  return read_draws(in);
}

}  // namespace latentdyad
