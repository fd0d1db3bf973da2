#include "saddle/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace saddle {

std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    return out;
}

}  // namespace

void write_hits_csv(const std::filesystem::path& path, const std::vector<HitRecord>& hits) {
    auto out = open_out(path);
    out << "repetition,h_i,y,t_hit,branch\n";
    for (const auto& h : hits)
        out << h.repetition << ',' << format_real(h.h_i) << ',' << format_real(h.y) << ','
            << format_real(h.t_hit) << ',' << (h.branch > 0 ? "+1" : "-1") << '\n';
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist,
                         double a_mle) {
    auto out = open_out(path);
    out << "bin_left,bin_right,count,density,fitted_density\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double left = static_cast<double>(i) * hist.bin_width;
        const double right = left + hist.bin_width;
        const double center = 0.5 * (left + right);
        const double fitted = (a_mle > 0.0 && std::isfinite(a_mle))
                                  ? family_f(center, a_mle)
                                  : 0.0;
        out << format_real(left) << ',' << format_real(right) << ',' << hist.counts[i] << ','
            << format_real(hist.density[i]) << ',' << format_real(fitted) << '\n';
    }
}

nlohmann::json fit_to_json(const FitResult& fit) {
    return {{"a_mle", fit.a_mle},       {"a_lsq", fit.a_lsq},
            {"a_stderr", fit.a_stderr}, {"chi_sq", fit.chi_sq},
            {"dof", fit.dof},           {"ks_stat", fit.ks_stat},
            {"n_hits", fit.n_hits},     {"n_no_hit", fit.n_no_hit}};
}

nlohmann::json theory_to_json(const TheoryPrediction& t) {
    nlohmann::json j{{"sigma_inf_sq", t.sigma_inf_sq},
                     {"sigma_sq", t.sigma_sq},
                     {"gamma", t.gamma},
                     {"mean_hit", t.mean_hit},
                     {"std_hit", t.std_hit}};
    if (std::isfinite(t.a_predicted))
        j["a_predicted"] = t.a_predicted;
    else
        j["a_predicted"] = nullptr;  // sigma = 0 (degenerate angle) or lambda != mu
    return j;
}

nlohmann::json ks_to_json(const KsReport& rep) {
    return {{"ks_stat", rep.ks_stat},
            {"p_value", rep.p_value},
            {"n_native", rep.n1},
            {"n_injected", rep.n2},
            {"agree_at_1pct", rep.agree_at_1pct}};
}

nlohmann::json sweep_stats_to_json(const SweepResult& res) {
    nlohmann::json j{{"n_hits", res.hits.size()},
                     {"n_no_hit", res.n_no_hit},
                     {"n_diverged", res.n_diverged},
                     {"total_steps", res.total_steps}};
    if (res.aggregate_error) j["aggregate_error"] = *res.aggregate_error;
    return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

}  // namespace saddle
