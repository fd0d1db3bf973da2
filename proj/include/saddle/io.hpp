#pragma once

// CSV and JSON emitters for the experiment outputs.  All reals are written
// with 17 significant digits so binary64 values round-trip exactly.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "saddle/experiment.hpp"
#include "saddle/theory.hpp"

namespace saddle {

/// 17-significant-digit representation (shortest form nlohmann/printf "%.17g").
std::string format_real(double x);

/// `repetition,h_i,y,t_hit,branch`, one row per hit.
void write_hits_csv(const std::filesystem::path& path, const std::vector<HitRecord>& hits);

/// `bin_left,bin_right,count,density,fitted_density` (gnuplot-ready; the
/// fitted density is the family evaluated at the bin center with a_mle).
void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist,
                         double a_mle);

nlohmann::json fit_to_json(const FitResult& fit);
nlohmann::json theory_to_json(const TheoryPrediction& t);
nlohmann::json ks_to_json(const KsReport& rep);
nlohmann::json sweep_stats_to_json(const SweepResult& res);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace saddle
