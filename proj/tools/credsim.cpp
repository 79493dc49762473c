#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "polycred/adversary.hpp"
#include "polycred/credibility.hpp"
#include "polycred/errors.hpp"
#include "polycred/format.hpp"
#include "polycred/metrics.hpp"
#include "polycred/sim.hpp"

using namespace polycred;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitViolations = 2;

struct Options {
    std::string exp = "exp1";
    std::string config;
    std::string out;
    std::string format = "json";
    std::string transcript;
    std::string root;
    std::string bids;
    std::string cls;
    std::string grid;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    int samples = 500;
    std::optional<double> delta;
};

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

ScenarioConfig load_config(const Options& o) {
    ScenarioConfig c = o.config.empty() ? ScenarioConfig{} : scenario_from_json(read_json(o.config));
    if (o.seed_set) c.seeds = {o.seed};
    c.validate();
    return c;
}

int jobs_for(const Options& o) {
    if (o.jobs > 0) return o.jobs;
    if (const char* env = std::getenv("CRED_SIM_JOBS")) {
        try {
            int j = std::stoi(env);
            if (j > 0) return j;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("CRED_SIM_JOBS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << body;
}

fs::path out_dir(const Options& o) {
    fs::path d(o.out);
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec || !fs::is_directory(d)) throw ConfigError("output directory not writable: " + o.out);
    return d;
}

std::string dump(const nlohmann::ordered_json& j) { return rounded(j).dump(2) + "\n"; }

std::vector<int> parse_grid(const std::string& s) {
    std::vector<int> g;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            std::size_t used = 0;
            g.push_back(std::stoi(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("bad grid value: '" + tok + "'");
        }
    }
    return g;
}

std::vector<int> default_grid(TopologyClass c) {
    switch (c) {
        case TopologyClass::series: return {2, 4, 8, 16};
        case TopologyClass::parallel: return {1, 2, 4, 8};
        case TopologyClass::tree: return {1, 2, 3, 4};
        case TopologyClass::general: return {4, 6, 8, 12};
        default: throw ConfigError("no scaling sweep for class " + to_string(c));
    }
}

TopologyClass class_arg(const std::string& s) {
    try {
        return topology_class_from_string(s);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

int cmd_run(const Options& o) {
    ScenarioConfig c = load_config(o);
    ExperimentSpec spec = experiment_spec(o.exp, c);
    ExperimentReport r = run_experiment(spec, c, jobs_for(o));
    const auto summary = to_json(r);
    if (!o.out.empty()) {
        fs::path d = out_dir(o);
        write_file(d / (o.exp + "_summary.json"), dump(summary));
        write_file(d / (o.exp + "_rounds.csv"), rounds_csv(r));
    }
    if (o.format == "csv") {
        std::cout << "condition,conc_op,conc_w,conc_ag,concabs_op,positive_surplus_rate,detection_rate,"
                     "mean_net_surplus\n";
        for (const auto& cr : r.conditions)
            std::cout << cr.condition.name << ',' << format_float(cr.conc.conc_op) << ','
                      << format_float(cr.conc.conc_w) << ',' << format_float(cr.conc.conc_ag) << ','
                      << format_float(cr.conc.concabs_op) << ',' << format_float(cr.positive_surplus_rate) << ','
                      << format_float(cr.detection_rate) << ',' << format_float(cr.mean_net_surplus) << '\n';
    } else {
        std::cout << dump(summary);
    }
    std::cerr << "digest " << report_digest(r) << "\n";
    return kExitOk;
}

int cmd_verify(const Options& o) {
    ClinchTranscript t;
    try {
        t = transcript_from_json(read_json(o.transcript));
    } catch (const StructureError& e) {
        throw ConfigError(e.what());
    }
    const std::string root = o.root.empty() ? t.commitment_root : o.root;
    Verdict v = verify_transcript(t, root);
    std::cout << dump(to_json(v));
    return v.consistent() ? kExitOk : kExitViolations;
}

int cmd_sweep(const Options& o) {
    ScenarioConfig c = load_config(o);
    const TopologyClass cls = class_arg(o.cls);
    SweepOptions opt;
    opt.jobs = jobs_for(o);
    ScalingFit fit = scaling_sweep(cls, o.grid.empty() ? default_grid(cls) : parse_grid(o.grid), c.seeds, opt);
    if (!o.out.empty()) {
        fs::path d = out_dir(o);
        write_file(d / ("sweep_" + o.cls + ".json"), dump(to_json(fit)));
        write_file(d / ("sweep_" + o.cls + ".csv"), sweep_csv(fit));
    }
    std::cout << (o.format == "csv" ? sweep_csv(fit) : dump(to_json(fit)));
    return kExitOk;
}

int cmd_gamma(const Options& o) {
    ScenarioConfig c = load_config(o);
    GammaSummary g = gamma_distribution(class_arg(o.cls), c, o.samples, c.seeds.front());
    if (o.format == "csv") {
        std::cout << "sample,gamma\n";
        for (std::size_t k = 0; k < g.samples.size(); ++k) std::cout << k << ',' << format_float(g.samples[k]) << '\n';
    } else {
        std::cout << dump(to_json(g));
    }
    if (!o.out.empty()) write_file(out_dir(o) / ("gamma_" + o.cls + ".json"), dump(to_json(g)));
    return kExitOk;
}

// {"bids": [...], "rank_table": [...]} or {"bids": [...], "network": {dag}},
// optionally with "delta"; without one, delta is half the pair's window.
int cmd_perturb(const Options& o) {
    const auto j = read_json(o.bids);
    if (!j.contains("bids")) throw ConfigError(o.bids + ": missing 'bids'");
    BidProfile bids = j.at("bids").get<BidProfile>();
    OraclePtr f;
    if (j.contains("rank_table"))
        f = explicit_oracle(static_cast<int>(bids.size()), j.at("rank_table").get<std::vector<double>>());
    else if (j.contains("network"))
        f = make_oracle(dag_from_json(j.at("network")));
    else
        throw ConfigError(o.bids + ": need 'rank_table' or 'network'");
    if (f->size() != static_cast<int>(bids.size())) throw ConfigError("bid count does not match the instance");
    std::optional<double> delta = o.delta;
    if (!delta && j.contains("delta")) delta = j.at("delta").get<double>();
    Perturbation p = construct_perturbation(bids, *f, PriorityRule::bid(), kInf, delta);
    DeviationResult d = apply_deviation(p.strategy(), bids, Mechanism{}, f);
    nlohmann::ordered_json out;
    out["i"] = p.i;
    out["j"] = p.j;
    out["gap"] = p.gap;
    out["delta"] = p.delta;
    out["gamma"] = p.gamma;
    out["increment"] = p.increment;
    out["honest_payment"] = d.honest.pay[p.i];
    out["perturbed_payment"] = d.deviated.pay[p.i];
    if (o.format == "csv") {
        std::cout << "i,j,delta,gamma,increment\n"
                  << p.i << ',' << p.j << ',' << format_float(p.delta) << ',' << format_float(p.gamma) << ','
                  << format_float(p.increment) << '\n';
    } else {
        std::cout << dump(out);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Credibility simulations for polymatroid auctions"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* s) {
        s->add_option("--config", o.config, "scenario config (JSON)");
        s->add_option("--out", o.out, "output directory");
        s->add_option("--format", o.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
        s->add_option("--jobs", o.jobs, "worker threads (default: CRED_SIM_JOBS or 1)")->check(CLI::PositiveNumber);
        s->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t v) { o.seed = v, o.seed_set = true; }, "run this seed only");
    };
    auto* run = app.add_subcommand("run", "run an experiment");
    common(run);
    run->add_option("--exp", o.exp, "exp1 | exp2 | exp3 | r5");
    auto* verify = app.add_subcommand("verify", "check a clinching transcript");
    verify->add_option("--transcript", o.transcript, "transcript JSON")->required();
    verify->add_option("--root", o.root, "commitment root (default: the transcript's own)");
    verify->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}));
    auto* sweep = app.add_subcommand("sweep", "topology scaling sweep");
    common(sweep);
    sweep->add_option("--class", o.cls, "series | parallel | tree | general")->required();
    sweep->add_option("--grid", o.grid, "comma-separated parameter values");
    auto* gamma = app.add_subcommand("gamma", "distribution of pairwise capacity contests");
    common(gamma);
    gamma->add_option("--class", o.cls, "topology class")->required();
    gamma->add_option("--samples", o.samples, "number of samples")->check(CLI::Range(2, 1000000));
    auto* perturb = app.add_subcommand("perturb", "construct a payment perturbation");
    perturb->add_option("--bids", o.bids, "instance JSON")->required();
    perturb->add_option_function<double>(
        "--delta", [&](double v) { o.delta = v; }, "bid shift (default: from the file, else half the window)");
    perturb->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*run) return cmd_run(o);
        if (*verify) return cmd_verify(o);
        if (*sweep) return cmd_sweep(o);
        if (*gamma) return cmd_gamma(o);
        if (*perturb) return cmd_perturb(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
