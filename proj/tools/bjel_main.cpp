// Command-line front end: coverage simulations, CSV interval analysis, and
// design sampling. Exit codes: 0 success, 2 input error, 3 simulation
// quality failure, 4 inference infeasibility.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bjel/bjel.hpp"
#include "bjel/report.hpp"
#include "config.hpp"
#include "csv.hpp"

namespace {

int exit_code_for(bjel::errc c) {
    switch (c) {
        case bjel::errc::simulation_quality:
            return 3;
        case bjel::errc::degenerate_posterior:
        case bjel::errc::degenerate_variance:
        case bjel::errc::non_convergence:
            return 4;
        default:
            return 2;
    }
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    for (const std::string& item : bjel::cli::detail::split_commas(csv)) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::logic_error&) {
            bjel::fail(bjel::errc::bad_request, "expected a number, got '" + item + "'");
        }
    }
    return out;
}

// Size measures: inline comma-separated values, or a file with one value
// per line when the string does not parse as numbers.
std::vector<double> load_size_measures(const std::string& arg) {
    try {
        auto inline_vals = parse_double_list(arg);
        if (!inline_vals.empty()) return inline_vals;
    } catch (const bjel::error&) {
    }
    std::ifstream in(arg);
    if (!in) bjel::fail(bjel::errc::bad_request, "cannot read size measures from '" + arg + "'");
    std::vector<double> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        line = bjel::cli::detail::trim(line);
        if (line.empty()) continue;
        try {
            out.push_back(std::stod(line));
        } catch (const std::logic_error&) {
            bjel::fail(bjel::errc::bad_request, "bad size measure '" + line + "' in " + arg);
        }
    }
    return out;
}

void write_text_or_file(const std::string& content, const std::string& path) {
    if (path.empty()) {
        std::fputs(content.c_str(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) bjel::fail(bjel::errc::bad_request, "cannot write to '" + path + "'");
    out << content;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 std::optional<std::size_t> replicates_override, const std::string& out_path,
                 int threads_override) {
    bjel::cli::SimulateConfig cfg = bjel::cli::load_simulate_config(config_path);
    if (replicates_override) cfg.replicates = *replicates_override;
    if (threads_override > 0) cfg.threads = threads_override;

    bjel::PopulationSpec ps;
    ps.population_size = cfg.population_size;
    ps.beta0 = cfg.beta0;
    ps.beta1 = cfg.beta1;
    ps.x_shift = cfg.x_shift;
    ps.target_rho = cfg.rho;
    ps.seed = cfg.population_seed.value_or(seed);
    bjel::Population pop = bjel::generate_population(ps);

    bjel::DesignSpec ds;
    ds.population_size = cfg.population_size;
    ds.sample_size = cfg.sample_size;
    if (cfg.design == "rao_sampford") {
        ds.kind = bjel::DesignKind::rao_sampford;
        ds.size_measures = pop.x;
    } else if (cfg.design == "srswor") {
        ds.kind = bjel::DesignKind::srswor;
    } else {
        bjel::fail(bjel::errc::bad_request, "unknown design '" + cfg.design + "'");
    }

    std::vector<bjel::Method> methods;
    for (const auto& name : cfg.methods) methods.push_back(bjel::method_from_string(name));

    bjel::StudyResult res = bjel::run_study(pop, ds, bjel::find_kernel(cfg.kernel), methods,
                                            cfg.replicates, cfg.level, seed, cfg.threads);
    std::fputs(bjel::format_table(res).c_str(), stdout);
    if (!out_path.empty()) write_text_or_file(bjel::to_json(res).dump(2) + "\n", out_path);
    return 0;
}

int cmd_analyze(const std::string& input, const std::string& kernel_name,
                const std::string& method_name, const std::string& weight_col,
                const std::string& aux_cols, const std::string& aux_totals, double level,
                const std::string& format, const std::string& out_path) {
    bjel::cli::CsvTable table = bjel::cli::read_csv(input);
    if (table.column_index("y") < 0)
        bjel::fail(bjel::errc::bad_request, "CSV must contain a 'y' column");

    bjel::AnalysisInput in;
    auto ycol = table.column("y");
    in.y.assign(ycol.begin(), ycol.end());
    if (!weight_col.empty()) {
        auto wcol = table.column(weight_col);
        in.weights.assign(wcol.begin(), wcol.end());
    }
    if (!aux_cols.empty()) {
        auto names = bjel::cli::detail::split_commas(aux_cols);
        in.aux = bjel::Matrix(table.rows, names.size());
        for (std::size_t j = 0; j < names.size(); ++j) {
            auto col = table.column(names[j]);
            for (std::size_t i = 0; i < table.rows; ++i) in.aux(i, j) = col[i];
        }
        if (aux_totals.empty())
            bjel::fail(bjel::errc::bad_request, "--aux-cols requires --aux-totals");
        in.aux_totals = parse_double_list(aux_totals);
    } else if (!aux_totals.empty()) {
        bjel::fail(bjel::errc::bad_request, "--aux-totals requires --aux-cols");
    }

    bjel::AnalysisResult res = bjel::analyze(in, bjel::find_kernel(kernel_name),
                                             bjel::method_from_string(method_name), level);
    std::string text;
    if (format == "json") {
        text = bjel::to_json(res).dump(2) + "\n";
    } else if (format == "text") {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "method    %s\nkernel    %s\nn         %zu\nestimate  %.10g\n"
                      "interval  [%.10g, %.10g]  (level %.3g)\nscale     %.10g\n",
                      to_string(res.method), res.kernel.c_str(), res.n, res.estimate, res.lower,
                      res.upper, res.level, res.scale_used);
        text = buf;
        if (!res.diagnostics.empty()) text += "note      " + res.diagnostics + "\n";
    } else {
        bjel::fail(bjel::errc::bad_request, "unknown format '" + format + "'");
    }
    write_text_or_file(text, out_path);
    return 0;
}

int cmd_sample(std::size_t population_size, std::size_t sample_size, const std::string& sizes_arg,
               std::uint64_t seed, const std::string& out_path) {
    bjel::DesignSpec ds;
    ds.population_size = population_size;
    ds.sample_size = sample_size;
    if (!sizes_arg.empty()) {
        ds.kind = bjel::DesignKind::rao_sampford;
        ds.size_measures = load_size_measures(sizes_arg);
    }
    bjel::SampleDraw draw = bjel::draw_sample(ds, seed);

    std::string text = "index,incl_prob,design_weight\n";
    char buf[128];
    for (std::size_t i = 0; i < draw.indices.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", draw.indices[i], draw.incl_probs[i],
                      draw.design_weights[i]);
        text += buf;
    }
    write_text_or_file(text, out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian jackknife empirical likelihood for survey samples"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "run a replicated coverage study");
    std::string sim_config, sim_out;
    std::uint64_t sim_seed = 0;
    std::optional<std::size_t> sim_replicates;
    int sim_threads = 0;
    sim->add_option("--config", sim_config, "key=value or JSON config file")->required();
    sim->add_option("--seed", sim_seed, "base RNG seed (required for reproducibility)")->required();
    sim->add_option("--replicates", sim_replicates, "override the configured replicate count");
    sim->add_option("--out", sim_out, "write the JSON study result to this path");
    sim->add_option("--threads", sim_threads, "worker threads (default: hardware)");

    auto* ana = app.add_subcommand("analyze", "credible/confidence interval from a CSV file");
    std::string ana_input, ana_kernel, ana_method, ana_wcol, ana_aux, ana_totals,
        ana_format = "json", ana_out;
    double ana_level = 0.95;
    ana->add_option("--input", ana_input, "CSV file with a 'y' column")->required();
    ana->add_option("--kernel", ana_kernel, "mean|variance|pwm")->required();
    ana->add_option("--method", ana_method, "jel|bjel|jel_d|bjel_d|jel_w|bjel_w")->required();
    ana->add_option("--weight-col", ana_wcol, "survey weight column name");
    ana->add_option("--aux-cols", ana_aux, "comma-separated auxiliary column names");
    ana->add_option("--aux-totals", ana_totals, "population totals for the aux columns");
    ana->add_option("--level", ana_level, "interval level (default 0.95)");
    ana->add_option("--format", ana_format, "json|text (default json)");
    ana->add_option("--out", ana_out, "write output here instead of stdout");

    auto* smp = app.add_subcommand("sample", "draw one sample from a design");
    std::size_t smp_n_pop = 0, smp_n = 0;
    std::string smp_sizes, smp_out;
    std::uint64_t smp_seed = 0;
    smp->add_option("--population-size", smp_n_pop, "population size N")->required();
    smp->add_option("--sample-size", smp_n, "sample size n")->required();
    smp->add_option("--sizes", smp_sizes,
                    "size measures: comma-separated values or a file (one per line); "
                    "omit for SRSWOR");
    smp->add_option("--seed", smp_seed, "RNG seed")->required();
    smp->add_option("--out", smp_out, "write the sample CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_config, sim_seed, sim_replicates, sim_out, sim_threads);
        if (ana->parsed())
            return cmd_analyze(ana_input, ana_kernel, ana_method, ana_wcol, ana_aux, ana_totals,
                               ana_level, ana_format, ana_out);
        if (smp->parsed()) return cmd_sample(smp_n_pop, smp_n, smp_sizes, smp_seed, smp_out);
    } catch (const bjel::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
