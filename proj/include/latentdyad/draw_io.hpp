#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentdyad/sampler.hpp"

namespace latentdyad {

// Draw files are JSON Lines, one object per stored draw:
//
//   {"format":"latentdyad-draw/1","sweep":1200,"variant":"full",
//    "alpha":3.1,"kappa":2.4,"k":5,
//    "xi":{"beta1p":..,"beta2p":..,"beta3p":..,"beta1mu":..,"beta2mu":..,"beta3mu":..,"v":..},
//    "loglik":-1234.5,"eval_count":321,
//    "sites":[[x1,x2],...],"occupancy":[40,...],"assignment":[0,0,3,...]}
//
// `assignment[i]` indexes `sites` within the same record, so records stay
// meaningful regardless of how site labels churned during sampling. Doubles
// are written with round-trip precision.
inline constexpr const char* kDrawFormat = "latentdyad-draw/1";

nlohmann::json draw_to_json(const PosteriorDraw& draw);
PosteriorDraw draw_from_json(const nlohmann::json& j);

void write_draws(std::ostream& out, const std::vector<PosteriorDraw>& draws);
std::vector<PosteriorDraw> read_draws(std::istream& in);

void write_draw_file(const std::string& path, const std::vector<PosteriorDraw>& draws);
std::vector<PosteriorDraw> read_draw_file(const std::string& path);

nlohmann::json params_to_json(const PopulationParams& params);
PopulationParams params_from_json(const nlohmann::json& j, ModelVariant variant);

}  // namespace latentdyad
