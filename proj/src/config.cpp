#include "saddle/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include "saddle/io.hpp"
#include "saddle/version.hpp"

namespace saddle {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw config_error(what + ": cannot parse number '" + text + "'");
    }
    if (pos != text.size()) throw config_error(what + ": trailing characters in '" + text + "'");
    return v;
}

long long parse_integer(const std::string& text, const std::string& what) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &pos);
    } catch (const std::exception&) {
        throw config_error(what + ": cannot parse integer '" + text + "'");
    }
    if (pos != text.size()) throw config_error(what + ": trailing characters in '" + text + "'");
    return v;
}

}  // namespace

double parse_angle(const std::string& text) {
    std::string s = trim(text);
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    s.erase(std::remove_if(s.begin(), s.end(),
                           [](unsigned char c) { return std::isspace(c) || c == '*'; }),
            s.end());
    if (s.empty()) throw config_error("angle: empty value");

    const auto pi_pos = s.find("pi");
    if (pi_pos == std::string::npos) return parse_number(s, "angle");

    const std::string coef_str = s.substr(0, pi_pos);
    std::string rest = s.substr(pi_pos + 2);
    double coef = 1.0;
    if (!coef_str.empty()) coef = parse_number(coef_str, "angle coefficient");
    double div = 1.0;
    if (!rest.empty()) {
        if (rest.front() != '/')
            throw config_error("angle: expected '/denominator' after pi in '" + text + "'");
        div = parse_number(rest.substr(1), "angle denominator");
        if (div == 0.0) throw config_error("angle: zero denominator");
    }
    return coef * kPi / div;
}

StepperKind parse_stepper(const std::string& text) {
    if (text == "euler") return StepperKind::Euler;
    if (text == "rk4") return StepperKind::RK4;
    if (text == "inject") return StepperKind::NoiseInjection;
    throw config_error("stepper: expected euler|rk4|inject, got '" + text + "'");
}

PrecisionPolicy parse_precision(const std::string& text) {
    if (text == "single") return PrecisionPolicy::native_single();
    if (text == "double") return PrecisionPolicy::native_double();
    if (text.rfind("emulated:", 0) == 0) {
        const long long p = parse_integer(text.substr(9), "precision p");
        try {
            return PrecisionPolicy::emulated(static_cast<int>(p));
        } catch (const std::domain_error& e) {
            throw config_error(e.what());
        }
    }
    throw config_error("precision: expected single|double|emulated:<p>, got '" + text + "'");
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "lambda") cfg.lambda = parse_number(value, key);
    else if (key == "mu") cfg.mu = parse_number(value, key);
    else if (key == "phi") cfg.phi = parse_angle(value);
    else if (key == "x0") cfg.x0 = parse_number(value, key);
    else if (key == "h") cfg.h = parse_number(value, key);
    else if (key == "delta_h") cfg.delta_h = parse_number(value, key);
    else if (key == "k") cfg.k = static_cast<long>(parse_integer(value, key));
    else if (key == "theta") cfg.theta = parse_angle(value);
    else if (key == "bins") cfg.bins = static_cast<int>(parse_integer(value, key));
    else if (key == "stepper") cfg.stepper = value;
    else if (key == "precision") cfg.precision = value;
    else if (key == "inject_p") cfg.inject_p = parse_number(value, key);
    else if (key == "t_max") cfg.t_max = parse_number(value, key);
    else if (key == "max_steps") cfg.max_steps = parse_integer(value, key);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_integer(value, key));
    else if (key == "workers") cfg.workers = static_cast<int>(parse_integer(value, key));
    else throw config_error("unknown config key '" + key + "'");
}

namespace {

RunConfig load_manifest_json(std::istream& in, RunConfig cfg) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error(std::string("manifest: ") + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object())
        throw config_error("manifest: missing 'config' object");
    for (const auto& [key, value] : j["config"].items()) {
        if (value.is_string())
            apply_key(cfg, key, value.get<std::string>());
        else
            apply_key(cfg, key, value.dump());
    }
    return cfg;
}

}  // namespace

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path.string());

    // Manifest JSON or key = value?
    char first = 0;
    in >> std::ws;
    first = static_cast<char>(in.peek());
    if (first == '{') return load_manifest_json(in, base);

    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        apply_key(base, key, value);
    }
    return base;
}

SweepConfig to_sweep_config(const RunConfig& cfg) {
    SweepConfig sc;
    sc.base_h = cfg.h;
    sc.delta_h = cfg.delta_h;
    sc.k = cfg.k;
    sc.theta = cfg.theta;
    sc.spec = SaddleSpec{cfg.lambda, cfg.mu, cfg.phi, cfg.x0};
    sc.stepper = parse_stepper(cfg.stepper);
    sc.policy = parse_precision(cfg.precision);
    sc.bins = cfg.bins;
    sc.master_seed = cfg.seed;
    sc.inject_p = cfg.inject_p;
    sc.t_max = cfg.t_max;
    sc.max_steps = cfg.max_steps;
    return sc;
}

nlohmann::json manifest_json(const RunConfig& cfg, const std::string& command) {
    char stamp[32] = "unknown";
    const std::time_t now = std::time(nullptr);
    if (std::tm tm{}; gmtime_r(&now, &tm) != nullptr)
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    nlohmann::json config{
        {"lambda", cfg.lambda},   {"mu", cfg.mu},
        {"phi", cfg.phi},         {"x0", cfg.x0},
        {"h", cfg.h},             {"delta_h", cfg.delta_h},
        {"k", cfg.k},             {"theta", cfg.theta},
        {"bins", cfg.bins},       {"stepper", cfg.stepper},
        {"precision", cfg.precision}, {"inject_p", cfg.inject_p},
        {"t_max", cfg.t_max},     {"max_steps", cfg.max_steps},
        {"seed", cfg.seed},       {"workers", cfg.workers}};
    return {{"artifact", std::string("saddlelab ") + kVersion},
            {"command", command},
            {"timestamp", stamp},
            {"master_seed", cfg.seed},
            {"config", config}};
}

void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    const std::string& command) {
    write_json(dir / "manifest.json", manifest_json(cfg, command));
}

}  // namespace saddle
