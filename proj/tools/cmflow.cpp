// Batch experiment driver: cmflow <toy|moving|curve|surface|converge> [--config f] [--preset p] [--key value ...]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "cmflow/config.hpp"
#include "cmflow/errors.hpp"
#include "cmflow/experiments.hpp"

namespace {

using namespace cmflow;
namespace fs = std::filesystem;

constexpr int kConfigError = 2;
constexpr int kNumericalAbort = 3;

std::string sha256_hex(const std::string& text)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

struct Invocation {
    Experiment experiment;
    std::string config_path;
    std::string preset;
    std::vector<std::string> extras;
};

Config resolve(const Invocation& inv)
{
    Config cfg(inv.experiment);
    if (!inv.preset.empty()) cfg.apply_preset(inv.preset);
    if (!inv.config_path.empty()) cfg.load_file(inv.config_path);
    const auto& ex = inv.extras;
    for (std::size_t i = 0; i < ex.size(); ++i) {
        const std::string& a = ex[i];
        if (a.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + a + "'");
        std::string key = a.substr(2), value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key.erase(eq);
        } else {
            if (i + 1 >= ex.size()) throw ConfigError("option '" + a + "' needs a value");
            value = ex[++i];
        }
        std::replace(key.begin(), key.end(), '-', '_');
        cfg.set(key, value);
    }
    return cfg;
}

RunArtifacts run(const Config& cfg, nlohmann::json& summary)
{
    switch (cfg.experiment()) {
    case Experiment::Toy: {
        ToyResult r = run_toy_redistribution(cfg);
        for (const ToyRun& t : r.runs) {
            summary["energy"][std::to_string(t.n)] = {{"initial", t.trace.front().energy},
                                                      {"final", t.trace.back().energy}};
        }
        return r;
    }
    case Experiment::Moving: {
        MovingResult r = run_moving_density(cfg);
        for (const MovingRow& row : r.rows) summary["errors"].push_back({row.h, row.dt, row.nu, row.err});
        return r;
    }
    case Experiment::Curve:
    case Experiment::Surface: {
        AdvectionResult r =
            cfg.experiment() == Experiment::Curve ? run_curve_advection(cfg) : run_surface_advection(cfg);
        for (const ChartReport& c : r.reports) {
            summary["stats"].push_back({{"chart", c.name},
                                        {"t", c.t},
                                        {"sigma_P", c.p.sigma},
                                        {"median_P", c.p.median},
                                        {"sigma_Q", c.q.sigma},
                                        {"median_Q", c.q.median},
                                        {"invariance", c.invariance}});
        }
        summary["max_ambient_error"] = r.max_ambient_error;
        return r;
    }
    case Experiment::Convergence: {
        ConvergenceResult r = run_convergence(cfg);
        for (const OrderRow& o : r.rows) summary["orders"].push_back({o.study, o.m, o.quantity, o.order});
        return r;
    }
    }
    throw Error("unknown experiment");
}

int execute(const Invocation& inv)
{
    const auto start = std::chrono::steady_clock::now();
    const Config cfg = resolve(inv);
    const fs::path out = cfg.text("output_dir");
    fs::create_directories(out);
    const fs::path resolved = out / "config.resolved.txt";
    {
        std::ofstream os = open_output(resolved);
        os << cfg.canonical();
    }
    nlohmann::json summary = nlohmann::json::object();
    RunArtifacts art = run(cfg, summary);
    art.files.push_back(resolved);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::json m;
    m["experiment"] = experiment_name(cfg.experiment());
    m["config_hash"] = sha256_hex(cfg.canonical());
    m["config"] = cfg.values();
    m["artifacts"] = nlohmann::json::array();
    for (const fs::path& p : art.files) m["artifacts"].push_back(p.string());
    m["remaps"] = art.remaps;
    m["wall_time_s"] = wall;
    m["audit"] = {{"densities", art.audit.densities},
                  {"heat_flows", art.audit.flows},
                  {"max_mass_error", art.audit.mass_error},
                  {"max_overshoot", art.audit.overshoot},
                  {"max_heat_overshoot", art.audit.heat_overshoot}};
    m["summary"] = summary;
    std::ofstream os = open_output(out / "manifest.json");
    os << m.dump(2) << '\n';
    std::cout << "wrote " << art.files.size() + 1 << " files to " << out.string() << " in " << wall << " s\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Characteristic-map density redistribution experiments"};
    app.require_subcommand(1);
    Invocation inv{};
    const std::pair<const char*, Experiment> commands[] = {
        {"toy", Experiment::Toy},
        {"moving", Experiment::Moving},
        {"curve", Experiment::Curve},
        {"surface", Experiment::Surface},
        {"converge", Experiment::Convergence},
    };
    const char* help[] = {"toy annulus redistribution energy traces", "moving-density redistribution errors",
                          "curve advection with equiareal reparametrization",
                          "surface advection with equiareal reparametrization",
                          "interpolation and heat-flow map convergence orders"};
    int i = 0;
    for (const auto& [name, exp] : commands) {
        CLI::App* sub = app.add_subcommand(name, help[i++]);
        sub->add_option("--config", inv.config_path, "key = value config file");
        sub->add_option("--preset", inv.preset, "desk or paper");
        sub->allow_extras();
        sub->footer("Any config key can be overridden as --key value.");
        sub->callback([&inv, sub, exp = exp] {
            inv.experiment = exp;
            inv.extras = sub->remaining();
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }
    try {
        return execute(inv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DomainError& e) {
        std::cerr << "invalid parameters: " << e.what() << '\n';
        return kConfigError;
    } catch (const NumericalAbort& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return kNumericalAbort;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
