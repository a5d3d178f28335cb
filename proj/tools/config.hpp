#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bjel/errors.hpp"

namespace bjel::cli {

// Simulation run description, read from a flat key=value file or the same
// keys as a JSON object.
struct SimulateConfig {
    std::size_t population_size = 1000;
    std::size_t sample_size = 100;
    std::string kernel = "pwm";
    std::string design = "rao_sampford";
    double rho = 0.3;
    double beta0 = 1.0;
    double beta1 = 1.0;
    double x_shift = 1.0;
    double level = 0.95;
    std::size_t replicates = 1000;
    std::vector<std::string> methods = {"jel", "bjel", "jel_d", "bjel_d", "jel_w", "bjel_w"};
    std::optional<std::uint64_t> population_seed;  // defaults to the run seed
    int threads = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline void apply_key(SimulateConfig& c, const std::string& key, const std::string& value) {
    try {
        if (key == "population_size")
            c.population_size = std::stoull(value);
        else if (key == "sample_size")
            c.sample_size = std::stoull(value);
        else if (key == "kernel")
            c.kernel = value;
        else if (key == "design")
            c.design = value;
        else if (key == "rho")
            c.rho = std::stod(value);
        else if (key == "beta0")
            c.beta0 = std::stod(value);
        else if (key == "beta1")
            c.beta1 = std::stod(value);
        else if (key == "x_shift")
            c.x_shift = std::stod(value);
        else if (key == "level")
            c.level = std::stod(value);
        else if (key == "replicates")
            c.replicates = std::stoull(value);
        else if (key == "methods")
            c.methods = split_commas(value);
        else if (key == "population_seed")
            c.population_seed = std::stoull(value);
        else if (key == "threads")
            c.threads = std::stoi(value);
        else
            fail(errc::bad_request, "unknown config key '" + key + "'");
    } catch (const std::logic_error&) {
        fail(errc::bad_request, "bad value '" + value + "' for config key '" + key + "'");
    }
}

}  // namespace detail

inline SimulateConfig load_simulate_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::bad_request, "cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    SimulateConfig c;
    std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) fail(errc::bad_request, "config '" + path + "' is not valid JSON");
        for (auto& [key, value] : j.items()) {
            if (key == "methods" && value.is_array()) {
                c.methods.clear();
                for (auto& m : value) c.methods.push_back(m.get<std::string>());
            } else {
                std::string s = value.is_string() ? value.get<std::string>() : value.dump();
                detail::apply_key(c, key, s);
            }
        }
        return c;
    }

    std::stringstream lines(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            fail(errc::bad_request,
                 "config line " + std::to_string(lineno) + " is not key=value: '" + s + "'");
        detail::apply_key(c, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
    }
    return c;
}

}  // namespace bjel::cli
