// misspec — generate synthetic datasets, fit growth models with adaptive
// MCMC, reproduce the headline experiments, and diagnose chain output.
//
// Exit codes: 0 success, 1 usage/input error, 2 convergence not certified,
// 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "misspec/diagnostics.hpp"
#include "misspec/experiment.hpp"
#include "misspec/synthdata.hpp"

namespace fs = std::filesystem;
using namespace misspec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitNumeric = 3;


struct FitLine {
    std::string name;
    FitResult res;
};

std::string interval_cell(const FitResult& r, const std::string& coord) {
    std::ostringstream os;
    os << std::setprecision(4) << std::fixed << r.map_of(coord) << " (" << r.ci_lo(coord) << ", "
       << r.ci_hi(coord) << ")";
    return os.str();
}

void print_fit_line(const FitResult& r, const std::string& name) {
    std::cout << name << ": r MAP " << std::setprecision(4) << std::fixed << r.map_of("r")
              << "  CI (" << r.ci_lo("r") << ", " << r.ci_hi("r") << ")  max R-hat "
              << std::setprecision(3) << r.rhat_max() << (r.converged() ? "" : "  [NOT CONVERGED]")
              << std::defaultfloat << std::endl;
}

// One named fit inside a reproduce target: resolve, run, persist, report.
FitResult reproduce_fit(const Dataset& data, const std::string& group, const std::string& model,
                        std::uint64_t seed, long iters, int chains, const std::string& dir) {
    ExperimentConfig cfg;
    cfg.group = group;
    cfg.model = model;
    cfg.mcmc.seed = seed;
    cfg.mcmc.iters = iters > 0 ? iters : default_iters(model);
    cfg.mcmc.chains = chains;
    cfg.out = dir;
    FitResult res = run_fit(cfg, data);
    write_fit_outputs(res, dir);
    print_fit_line(res, group + " / " + model);
    return res;
}

int cmd_generate(const std::string& scenario, std::uint64_t seed, const std::string& out_dir) {
    Dataset ds = generate_scenario(scenario, seed);
    fs::create_directories(out_dir);
    std::string base = out_dir + "/" + scenario;
    ds.write_csv(base + ".csv");
    ds.write_metadata(base + ".meta.json");
    std::cout << "wrote " << base << ".csv (" << ds.records.size() << " records, "
              << ds.group_ids().size() << " group(s)) and " << base << ".meta.json" << std::endl;
    return kExitOk;
}

int cmd_fit(ExperimentConfig cfg) {
    if (cfg.out.empty()) cfg.out = "fit_out";
    FitResult res = run_fit(cfg);
    write_fit_outputs(res, cfg.out);
    print_fit_line(res, cfg.group.empty() ? res.config.group : cfg.group);
    std::cout << "results in " << cfg.out << std::endl;
    if (!res.converged()) {
        std::cerr << "convergence not certified: max R-hat " << res.rhat_max() << " >= 1.05"
                  << std::endl;
        return kExitNotConverged;
    }
    return kExitOk;
}

int cmd_reproduce(const std::string& target, std::uint64_t seed, long iters, int chains,
                  std::vector<int> n_list, const std::string& out_root) {
    std::vector<FitLine> lines;
    std::string out = out_root.empty() ? "reproduce_" + target : out_root;
    fs::create_directories(out);

    auto fit_all = [&](const Dataset& data, const std::vector<std::string>& groups,
                       const std::vector<std::string>& models) {
        for (const auto& g : groups)
            for (const auto& m : models)
                lines.push_back({g + "/" + m,
                                 reproduce_fit(data, g, m, seed, iters, chains, out + "/" + g + "_" + m)});
    };

    if (target == "fig1") {
        Dataset data = generate_scenario("fig1", seed);
        data.write_csv(out + "/fig1.csv");
        data.write_metadata(out + "/fig1.meta.json");
        std::vector<std::string> groups(data.group_ids().begin(), data.group_ids().end());
        fit_all(data, groups, {"logistic"});
    } else if (target == "fig3") {
        for (int ic : {1, 2}) {
            std::string id = "fig3_ic" + std::to_string(ic);
            Dataset data = generate_scenario(id, seed);
            data.write_csv(out + "/" + id + ".csv");
            data.write_metadata(out + "/" + id + ".meta.json");
            fit_all(data, {id}, {"logistic", "known_truth", "richards", "gp_crowding"});
        }
    } else if (target == "fig4") {
        for (int ic : {1, 2}) {
            std::string id = "fig4_ic" + std::to_string(ic);
            Dataset data = generate_scenario(id, seed);
            data.write_csv(out + "/" + id + ".csv");
            data.write_metadata(out + "/" + id + ".meta.json");
            fit_all(data, {id}, {"logistic", "gp_crowding"});
        }
    } else if (target == "table1") {
        if (n_list.empty()) n_list = {5, 50};
        // rows: model x IC; columns: replicate counts. Cells hold "MAP (lo, hi)".
        std::map<std::string, std::map<int, std::string>> cells;
        std::ofstream longcsv(out + "/table1_long.csv");
        longcsv << "model,ic,N,r_map,r_ci_lo,r_ci_hi,rhat_max\n";
        for (int n : n_list) {
            std::string scen = "table1_N" + std::to_string(n);
            Dataset data = generate_scenario(scen, seed);
            data.write_csv(out + "/" + scen + ".csv");
            data.write_metadata(out + "/" + scen + ".meta.json");
            for (int ic : {1, 2}) {
                std::string g = scen + "_ic" + std::to_string(ic);
                for (const std::string& m : {std::string("logistic"), std::string("gp_crowding")}) {
                    FitResult r =
                        reproduce_fit(data, g, m, seed, iters, chains, out + "/" + g + "_" + m);
                    cells[m + ",ic" + std::to_string(ic)][n] = interval_cell(r, "r");
                    longcsv << m << ',' << ic << ',' << n << ',' << format_double(r.map_of("r"))
                            << ',' << format_double(r.ci_lo("r")) << ','
                            << format_double(r.ci_hi("r")) << ',' << format_double(r.rhat_max())
                            << '\n';
                    lines.push_back({g + "/" + m, std::move(r)});
                }
            }
        }
        std::ofstream tbl(out + "/table1.csv");
        tbl << "model,ic";
        for (int n : n_list) tbl << ",N=" << n;
        tbl << '\n';
        for (const auto& [row, byn] : cells) {
            tbl << row;
            for (int n : n_list) tbl << ",\"" << byn.at(n) << '"';
            tbl << '\n';
        }
        std::cout << "table written to " << out << "/table1.csv" << std::endl;
    } else if (target == "fig5") {
        Dataset data = generate_scenario("fig5", seed);
        data.write_csv(out + "/fig5.csv");
        data.write_metadata(out + "/fig5.meta.json");
        fit_all(data, {"fig5"}, {"pde_constant_D", "pde_gp_diffusivity", "pde_gp_both"});
    } else {
        std::cerr << "unknown reproduce target '" << target
                  << "' (expected fig1|fig3|fig4|fig5|table1)" << std::endl;
        return kExitUsage;
    }

    bool all_ok = true;
    for (const auto& l : lines) all_ok = all_ok && l.res.converged();
    std::cout << (all_ok ? "all fits converged" : "some fits not converged (max R-hat >= 1.05)")
              << "; outputs in " << out << std::endl;
    return all_ok ? kExitOk : kExitNotConverged;
}

// Re-derive chain diagnostics from a persisted draws.csv. Acceptance rates
// come from summary.json when present (they are not recoverable from a
// thinned trace).
int cmd_diagnose(const std::string& dir) {
    std::string path = fs::is_directory(dir) ? dir + "/draws.csv" : dir;
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot read " + path);

    std::string line;
    long lineno = 0;
    // Optional leading comment lines, then the header row.
    std::vector<std::string> names;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) names.push_back(tok);
        break;
    }
    if (names.size() < 3 || names.front() != "chain" || names.back() != "log_posterior")
        throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                    ": expected header chain,iter,<coords...>,log_posterior");
    const std::size_t ncols = names.size();
    std::map<int, std::vector<std::vector<double>>> per_chain;  // chain -> rows
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> row;
        row.reserve(ncols);
        while (std::getline(ss, tok, ',')) {
            try {
                row.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                            ": cannot parse '" + tok + "' as a number");
            }
        }
        if (row.size() != ncols)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(ncols) + " fields, got " +
                                        std::to_string(row.size()));
        per_chain[int(row[0])].push_back(std::move(row));
    }
    if (per_chain.empty()) throw std::invalid_argument(path + ": no draws");
    if (per_chain.size() == 1)
        std::cout << "warning: single chain; R-hat computed from split halves only" << std::endl;

    const std::size_t ncoord = ncols - 3;  // strip chain, iter, log_posterior
    std::cout << std::left << std::setw(14) << "coordinate" << std::right << std::setw(10) << "R-hat"
              << std::setw(12) << "ESS" << std::endl;
    bool all_ok = true;
    for (std::size_t j = 0; j < ncoord; ++j) {
        std::vector<std::vector<double>> chains;
        for (const auto& [c, rows] : per_chain) {
            std::vector<double> seq(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) seq[i] = rows[i][2 + j];
            chains.push_back(std::move(seq));
        }
        double rh = rank_normalised_split_rhat(chains);
        double ess = effective_sample_size(chains);
        bool ok = rh < 1.05;
        all_ok = all_ok && ok;
        std::cout << std::left << std::setw(14) << names[2 + j] << std::right << std::setw(10)
                  << std::setprecision(4) << std::fixed << rh << std::setw(12) << std::setprecision(0)
                  << ess << (ok ? "" : "   << R-hat >= 1.05") << std::defaultfloat << std::endl;
    }

    std::string summary_path = fs::path(path).parent_path() / "summary.json";
    std::ifstream sj(summary_path);
    if (sj) {
        nlohmann::json j;
        sj >> j;
        if (j.contains("acceptance")) {
            std::cout << "acceptance:";
            for (const auto& a : j.at("acceptance")) std::cout << ' ' << a.get<double>();
            std::cout << std::endl;
        }
    }
    std::cout << (all_ok ? "all R-hat < 1.05" : "convergence not certified") << std::endl;
    return all_ok ? kExitOk : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semi-parametric growth-model inference"};
    app.require_subcommand(1);

    std::string scenario, config_path, dataset_path, group, model, target, diag_dir;
    std::string gen_out = ".", fit_out, rep_out;
    std::uint64_t seed = 1;
    long iters = 0;
    int chains = 4;
    std::vector<int> n_list;

    auto* gen = app.add_subcommand("generate", "write a synthetic dataset CSV + metadata");
    gen->add_option("scenario", scenario, "scenario id")->required();
    gen->add_option("--seed", seed, "RNG seed");
    gen->add_option("--out", gen_out, "output directory")->capture_default_str();

    auto* fit = app.add_subcommand("fit", "run MCMC for one model on one dataset");
    fit->add_option("--config", config_path, "JSON config file");
    fit->add_option("--dataset", dataset_path, "dataset CSV path");
    fit->add_option("--group", group, "scenario id within the dataset");
    fit->add_option("--model", model, "model kind");
    auto* fit_seed = fit->add_option("--seed", seed, "RNG seed");
    auto* fit_iters = fit->add_option("--iters", iters, "MCMC iterations per chain");
    auto* fit_chains = fit->add_option("--chains", chains, "number of chains");
    fit->add_option("--out", fit_out, "output directory");

    auto* rep = app.add_subcommand("reproduce", "run a full experiment target");
    rep->add_option("target", target, "fig1|fig3|fig4|fig5|table1")->required();
    rep->add_option("--seed", seed, "RNG seed");
    rep->add_option("--iters", iters, "override iterations per chain");
    rep->add_option("--chains", chains, "number of chains");
    rep->add_option("--N", n_list, "replicate counts for table1 (default 5 50)");
    rep->add_option("--out", rep_out, "output directory");

    auto* diag = app.add_subcommand("diagnose", "summarise chain convergence from draws.csv");
    diag->add_option("dir", diag_dir, "result directory or draws.csv path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(scenario, seed, gen_out);
        if (fit->parsed()) {
            ExperimentConfig cfg;
            if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);
            if (!dataset_path.empty()) cfg.dataset = dataset_path;
            if (!group.empty()) cfg.group = group;
            if (!model.empty()) {
                cfg.model = model;
                cfg.raw["model"] = model;
            }
            if (!fit_seed->empty()) cfg.mcmc.seed = seed;
            if (!fit_iters->empty()) cfg.mcmc.iters = iters;
            if (!fit_chains->empty()) cfg.mcmc.chains = chains;
            if (!fit_out.empty()) cfg.out = fit_out;
            if (cfg.dataset.empty()) throw std::invalid_argument("fit needs --dataset or a config with one");
            return cmd_fit(std::move(cfg));
        }
        if (rep->parsed()) return cmd_reproduce(target, seed, iters, chains, n_list, rep_out);
        if (diag->parsed()) return cmd_diagnose(diag_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return kExitNumeric;
    }
    return kExitUsage;
}
