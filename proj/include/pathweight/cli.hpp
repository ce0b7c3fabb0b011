#pragma once

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathweight/density.hpp"
#include "pathweight/montecarlo.hpp"
#include "pathweight/spectral.hpp"

namespace pathweight::cli {

// Exit codes are part of the contract: 0 ok, 1 numeric acceptance failure,
// 2 usage, 3 model domain violation, 4 I/O.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultSeed = 20210703;

struct RunConfig {
    std::string command;
    std::string model_str;
    std::vector<int> n_values;
    long samples = 0;
    std::uint64_t seed = kDefaultSeed;
    double eps = 0.0;
    std::string out;  // empty: CSV to stdout, metadata to stderr
    std::string format = "csv";
    int quadrature_order = kDefaultQuadratureOrder;
    std::string functional = "const1";

    CurvatureModel model() const { return parse_model(model_str); }

    static CurvatureModel parse_model(const std::string& text);
};

inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// "kind:dim[:K]" factors joined by '+', e.g. hyperbolic:2:-1+hyperbolic:2:-2.
inline CurvatureModel RunConfig::parse_model(const std::string& text) {
    if (text.empty()) throw UsageError("missing --model");
    std::vector<CurvatureFactor> factors;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, '+')) {
        std::vector<std::string> fields;
        std::stringstream fs(part);
        std::string f;
        while (std::getline(fs, f, ':')) fields.push_back(f);
        if (fields.size() < 2) throw UsageError("bad model factor: " + part);
        int dim = 0;
        double k = 0.0;
        try {
            dim = std::stoi(fields[1]);
            if (fields.size() >= 3) k = std::stod(fields[2]);
        } catch (const std::exception&) {
            throw UsageError("bad model factor: " + part);
        }
        if (fields[0] == "euclidean") {
            if (fields.size() >= 3 && k != 0.0)
                throw UsageError("euclidean factor cannot carry curvature: " + part);
            factors.push_back({dim, 0.0});
        } else if (fields[0] == "hyperbolic") {
            if (fields.size() < 3) throw UsageError("hyperbolic factor needs K: " + part);
            if (!(k < 0.0))
                throw ModelDomainError(
                    "non-negative sectional curvature violates the model domain: " + part);
            factors.push_back({dim, k});
        } else {
            throw UsageError("unknown model kind: " + fields[0]);
        }
        if (dim < 1) throw UsageError("model factor dimension must be >= 1: " + part);
    }
    if (factors.empty()) throw UsageError("missing --model");
    try {
        return CurvatureModel::product(factors);
    } catch (const std::invalid_argument& e) {
        throw ModelDomainError(e.what());
    }
}

inline std::vector<int> parse_n_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            out.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw UsageError("bad --n value: " + part);
        }
        if (out.back() < 1) throw UsageError("--n values must be >= 1");
    }
    if (out.empty()) throw UsageError("empty --n list");
    return out;
}

namespace detail_cli {

inline std::string json_model_to_string(const nlohmann::json& j) {
    if (j.is_string()) return j.get<std::string>();
    auto one = [](const nlohmann::json& o) -> std::string {
        if (!o.is_object() || !o.contains("kind") || !o.contains("dim"))
            throw UsageError("config model objects need kind and dim");
        std::string s = o.at("kind").get<std::string>() + ":" +
                        std::to_string(o.at("dim").get<int>());
        if (o.contains("K")) s += ":" + fmt_g17(o.at("K").get<double>());
        return s;
    };
    if (j.is_object()) return one(j);
    if (j.is_array()) {
        std::string s;
        for (const auto& o : j) {
            if (!s.empty()) s += "+";
            s += one(o);
        }
        return s;
    }
    throw UsageError("config model must be a string, object, or array");
}

}  // namespace detail_cli

/// Parse argv (without the program name). A JSON config file supplies
/// defaults; explicit flags override it; unknown config keys are rejected.
inline RunConfig parse_config(const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i)
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];

    RunConfig cfg;
    std::string n_text;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw IoError("cannot read config file: " + config_path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw UsageError(std::string("bad config JSON: ") + e.what());
        }
        if (!j.is_object()) throw UsageError("config must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (key == "command")
                cfg.command = value.get<std::string>();
            else if (key == "model")
                cfg.model_str = detail_cli::json_model_to_string(value);
            else if (key == "n")
                n_text = value.is_string() ? value.get<std::string>()
                                           : (value.is_number_integer()
                                                  ? std::to_string(value.get<long>())
                                                  : throw UsageError("config n must be int or string"));
            else if (key == "samples")
                cfg.samples = value.get<long>();
            else if (key == "seed")
                cfg.seed = value.get<std::uint64_t>();
            else if (key == "eps")
                cfg.eps = value.get<double>();
            else if (key == "out")
                cfg.out = value.get<std::string>();
            else if (key == "format")
                cfg.format = value.get<std::string>();
            else if (key == "quadrature_order")
                cfg.quadrature_order = value.get<int>();
            else if (key == "functional")
                cfg.functional = value.get<std::string>();
            else
                throw UsageError("unknown config key: " + key);
        }
    }

    CLI::App app{"pathweight: finite-dimensional Wiener measure approximations"};
    app.add_option("command", cfg.command,
                   "spectral-table | tau-convergence | density-mc | flat-sanity | "
                   "jacobi-verify | appendix-checks");
    app.add_option("--model", cfg.model_str, "kind:dim:K factors joined by '+'");
    app.add_option("--n", n_text, "mesh size or comma list");
    app.add_option("--samples", cfg.samples, "Monte Carlo sample count");
    app.add_option("--seed", cfg.seed, "master seed");
    app.add_option("--eps", cfg.eps, "H^eps cutoff (0 disables)");
    app.add_option("--out", cfg.out, "output CSV path (stdout when omitted)");
    app.add_option("--format", cfg.format, "csv | json");
    app.add_option("--quadrature-order", cfg.quadrature_order, "Gauss-Legendre order");
    app.add_option("--functional", cfg.functional, "const1 | endpoint-radius | energy-window");
    std::string config_opt;
    app.add_option("--config", config_opt, "JSON config file (flags override)");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help() << std::endl;
        throw UsageError("help requested");
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    static const std::vector<std::string> kCommands = {
        "spectral-table", "tau-convergence", "density-mc",
        "flat-sanity",    "jacobi-verify",   "appendix-checks"};
    if (cfg.command.empty()) throw UsageError("missing command");
    if (std::find(kCommands.begin(), kCommands.end(), cfg.command) == kCommands.end())
        throw UsageError("unknown command: " + cfg.command);
    if (cfg.format != "csv" && cfg.format != "json")
        throw UsageError("format must be csv or json");

    if (!n_text.empty()) cfg.n_values = parse_n_list(n_text);

    const bool needs_n = cfg.command == "spectral-table" || cfg.command == "tau-convergence" ||
                         cfg.command == "density-mc";
    if (needs_n && cfg.n_values.empty()) throw UsageError(cfg.command + " requires --n");
    if (cfg.command == "density-mc") {
        if (cfg.model_str.empty()) throw UsageError("density-mc requires --model");
        if (cfg.samples < 1) throw UsageError("density-mc requires --samples");
    }
    if (!cfg.model_str.empty()) (void)cfg.model();  // validate early (may raise exit-3)
    (void)functional_from_name(cfg.functional);
    return cfg;
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

struct OutputSink {
    std::ofstream file;
    std::ostream* os = nullptr;
    bool to_stdout = false;

    explicit OutputSink(const std::string& path) {
        if (path.empty()) {
            os = &std::cout;
            to_stdout = true;
        } else {
            file.open(path);
            if (!file) throw IoError("cannot open output file: " + path);
            os = &file;
        }
    }
    std::ostream& stream() { return *os; }
};

inline void write_metadata(const RunConfig& cfg) {
    nlohmann::json meta;
    meta["command"] = cfg.command;
    meta["version"] = kVersion;
    meta["seed"] = cfg.seed;
    meta["rng_kind"] = kRngKind;
    meta["quadrature_order"] = cfg.quadrature_order;
    meta["ode_steps"] = kDefaultOdeSteps;
    meta["model"] = cfg.model_str;
    meta["n"] = cfg.n_values;
    meta["samples"] = cfg.samples;
    meta["eps"] = cfg.eps;
    meta["functional"] = cfg.functional;
    meta["format"] = cfg.format;
    if (cfg.out.empty()) {
        std::cerr << meta.dump() << std::endl;
    } else {
        std::ofstream mo(cfg.out + ".meta.json");
        if (!mo) throw IoError("cannot write metadata for: " + cfg.out);
        mo << meta.dump(2) << std::endl;
    }
}

/// Generic table writer: CSV with a fixed column order, or a JSON array.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    void write(std::ostream& os, const std::string& format) const {
        if (format == "json") {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : rows) {
                nlohmann::json obj;
                for (std::size_t i = 0; i < columns.size(); ++i) obj[columns[i]] = r[i];
                arr.push_back(obj);
            }
            os << arr.dump(2) << "\n";
            return;
        }
        for (std::size_t i = 0; i < columns.size(); ++i)
            os << columns[i] << (i + 1 < columns.size() ? "," : "\n");
        for (const auto& r : rows)
            for (std::size_t i = 0; i < r.size(); ++i)
                os << r[i] << (i + 1 < r.size() ? "," : "\n");
    }
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_spectral_table(const RunConfig& cfg) {
    if (cfg.n_values.size() != 1) throw UsageError("spectral-table takes a single --n");
    const int n = cfg.n_values[0];
    if (n < 2) throw UsageError("spectral-table requires n >= 2");
    const double delta = 1.0 / n;
    const SpectralData sp = assemble_spectrum(n, delta);
    const double d3 = delta * delta * delta;
    Table t;
    t.columns = {"k", "theta_k", "r_k", "beta_k_sq", "lambda_k_over_delta3"};
    for (int k = 1; k < n; ++k)
        t.add_row({std::to_string(k), fmt_g17(sp.thetas[k - 1]), fmt_g17(sp.r_k(k)),
                   fmt_g17(sp.beta_sq[k - 1]), fmt_g17(sp.lambdas[k - 1] / d3)});
    t.add_row({std::to_string(n), fmt_g17(sp.gamma),
               fmt_g17(std::numeric_limits<double>::quiet_NaN()), fmt_g17(sp.beta_sq[n - 1]),
               fmt_g17(sp.lambdas[n - 1] / d3)});
    OutputSink sink(cfg.out);
    t.write(sink.stream(), cfg.format);
    write_metadata(cfg);
    return 0;
}

inline int cmd_tau_convergence(const RunConfig& cfg) {
    Table t;
    t.columns = {"n", "tau_p", "tau_g", "abs_err"};
    const double tg = tau_g();
    for (const int n : cfg.n_values) {
        if (n < 2) throw UsageError("tau-convergence requires n >= 2");
        const double tp = tau_p(n);
        t.add_row({std::to_string(n), fmt_g17(tp), fmt_g17(tg), fmt_g17(std::fabs(tp - tg))});
    }
    OutputSink sink(cfg.out);
    t.write(sink.stream(), cfg.format);
    write_metadata(cfg);
    return 0;
}

inline Table campaign_table(const std::string& experiment, const std::string& model_desc,
                            long samples, const std::vector<EstimateRow>& rows) {
    Table t;
    t.columns = {"experiment", "model", "n", "N", "mean", "stderr", "target", "z_score",
                 "wall_time_s"};
    for (const auto& r : rows)
        t.add_row({experiment, model_desc, std::to_string(r.n), std::to_string(samples),
                   fmt_g17(r.mean), fmt_g17(r.std_error),
                   fmt_g17(r.target ? *r.target : std::numeric_limits<double>::quiet_NaN()),
                   fmt_g17(r.z_score), fmt_g17(r.wall_time_s)});
    return t;
}

inline int cmd_density_mc(const RunConfig& cfg) {
    Campaign c;
    c.model = cfg.model();
    c.n_values = cfg.n_values;
    c.samples = cfg.samples;
    c.seed = cfg.seed;
    c.eps = cfg.eps;
    c.functional = functional_from_name(cfg.functional);
    c.quadrature_order = cfg.quadrature_order;
    std::vector<EstimateRow> rows;
    try {
        rows = run_campaign(c);
    } catch (const std::runtime_error& e) {
        std::cerr << "density-mc: " << e.what() << std::endl;
        return 1;
    }
    const Table t = campaign_table("density-mc", c.model.description(), cfg.samples, rows);
    OutputSink sink(cfg.out);
    t.write(sink.stream(), cfg.format);
    write_metadata(cfg);
    return 0;
}

inline int cmd_flat_sanity(const RunConfig& cfg) {
    const int n = cfg.n_values.empty() ? 8 : cfg.n_values[0];
    const long samples = cfg.samples > 0 ? cfg.samples : 1000;
    CurvatureModel model = cfg.model_str.empty() ? CurvatureModel::euclidean(2) : cfg.model();
    if (!model.flat()) throw UsageError("flat-sanity requires a flat model");
    const Partition part = uniform_partition(n);
    const double log_det_l = flat_gram(n, 1.0 / n, model.dim()).log_det();
    double worst = 0.0;
    for (long j = 0; j < samples; ++j) {
        const IncrementVector inc = sample_increments(part, model.dim(), cfg.seed, j);
        worst = std::max(worst,
                         std::fabs(rho_for_increments(model, inc, log_det_l,
                                                      cfg.quadrature_order).rho - 1.0));
    }
    const bool pass = worst <= 1e-10;
    Table t;
    t.columns = {"experiment", "model", "n", "N", "rho_max_abs_err", "pass"};
    t.add_row({"flat-sanity", model.description(), std::to_string(n), std::to_string(samples),
               fmt_g17(worst), pass ? "1" : "0"});
    OutputSink sink(cfg.out);
    t.write(sink.stream(), cfg.format);
    write_metadata(cfg);
    return pass ? 0 : 1;
}

inline int cmd_jacobi_verify(const RunConfig& cfg) {
    Table t;
    t.columns = {"check", "cases", "max_err", "tol", "pass"};
    bool all_pass = true;
    auto emit = [&](const std::string& name, int cases, double err, double tol) {
        const bool pass = err <= tol;
        all_pass = all_pass && pass;
        t.add_row({name, std::to_string(cases), fmt_g17(err), fmt_g17(tol), pass ? "1" : "0"});
    };

    // numeric integrator vs closed form on random constant PSD instances
    double worst_numeric = 0.0;
    int cases = 0;
    for (int trial = 0; trial < 12; ++trial) {
        const int d = 2 + trial % 3;
        Eigen::MatrixXd m(d, d);
        for (int r = 0; r < d; ++r)
            for (int c2 = 0; c2 < d; ++c2)
                m(r, c2) = keyed_normal(cfg.seed, trial, r, c2, StreamTag::kTest);
        const Eigen::MatrixXd a0 = m * m.transpose();
        const double delta = 0.5 + 0.05 * trial;
        const JacobiSegment exact = solve_segment_const(a0, delta);
        const JacobiSegment numeric = solve_segment_numeric(
            [&](double) { return a0; }, delta, kDefaultOdeSteps);
        worst_numeric = std::max(worst_numeric,
                                 (exact.s_end - numeric.s_end).operatorNorm());
        worst_numeric = std::max(worst_numeric,
                                 (exact.c_end - numeric.c_end).operatorNorm());
        ++cases;
    }
    emit("numeric-vs-closed", cases, worst_numeric, 1e-8);

    // sigma_min(S(s)) >= s and V(delta) = 0 and the Wronskian identity
    double worst_smin = 0.0, worst_vend = 0.0, worst_wronskian = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + trial % 3;
        Eigen::MatrixXd m(d, d);
        for (int r = 0; r < d; ++r)
            for (int c2 = 0; c2 < d; ++c2)
                m(r, c2) = keyed_normal(cfg.seed, 100 + trial, r, c2, StreamTag::kTest);
        const Eigen::MatrixXd a0 = m * m.transpose();
        const double delta = 0.3 + 0.02 * trial;
        const JacobiSegment seg = solve_segment_const(a0, delta);
        for (double frac : {0.25, 0.5, 1.0}) {
            const double s = frac * delta;
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(seg.S(s));
            worst_smin = std::max(worst_smin,
                                  (s - svd.singularValues().minCoeff()) / s);
            const Eigen::MatrixXd wr = seg.C(s).transpose() * seg.S_prime(s) -
                                       seg.C_prime(s).transpose() * seg.S(s) -
                                       Eigen::MatrixXd::Identity(d, d);
            worst_wronskian = std::max(worst_wronskian, wr.operatorNorm());
        }
        Eigen::MatrixXd m2 = m;
        m2(0, 0) += 0.5;
        const JacobiSegment seg2 = solve_segment_const(m2 * m2.transpose(), delta);
        const TransferData tr = transfer(seg, seg2);
        worst_vend = std::max(worst_vend, tr.v_at(delta).operatorNorm());
    }
    emit("sigma-min-S", 50, worst_smin, 1e-9);
    emit("V-at-delta", 50, worst_vend, 1e-9);
    emit("wronskian", 50, worst_wronskian, 1e-9);

    OutputSink sink(cfg.out);
    t.write(sink.stream(), cfg.format);
    write_metadata(cfg);
    return all_pass ? 0 : 1;
}

inline int cmd_appendix_checks(const RunConfig& cfg) {
    const CurvatureModel model =
        cfg.model_str.empty() ? CurvatureModel::constant_curvature(2, -1.0) : cfg.model();
    const long samples = cfg.samples > 0 ? cfg.samples : 100000;
    Table t;
    t.columns = {"check", "value", "stderr", "bound_lo", "bound_hi", "z", "pass"};
    bool all_pass = true;
    auto note = [&](const std::string& name, double v, double se, double lo, double hi, double z,
                    bool pass) {
        all_pass = all_pass && pass;
        t.add_row({name, fmt_g17(v), fmt_g17(se), fmt_g17(lo), fmt_g17(hi), fmt_g17(z),
                   pass ? "1" : "0"});
    };

    Campaign edc;
    edc.model = CurvatureModel::euclidean(2);
    edc.n_values = {10};
    edc.samples = samples;
    edc.seed = cfg.seed;
    const MomentReport ed = check_edb2(edc, 1.0, 1.0);
    note("edb2", ed.mean, ed.std_error, ed.exact, ed.exact, ed.z_score, ed.passed);

    const GaussTailReport gt = check_gauss_tail(2.0, 0.0, 1, samples, cfg.seed);
    note("gauss-tail", gt.empirical, gt.std_error, 0.0, gt.bound,
         std::numeric_limits<double>::quiet_NaN(), gt.passed);

    const MomentReport it = check_ito_trace(model, 64, 1.0, samples, cfg.seed);
    note("ito-trace", it.mean, it.std_error, 1.0, it.upper_bound,
         std::numeric_limits<double>::quiet_NaN(), it.passed);

    for (const int n : {16, 64}) {
        const MomentReport fb = check_fancy_band(model, n, samples, cfg.seed);
        note("fancy-band-n" + std::to_string(n), fb.mean, fb.std_error, 1.0, fb.upper_bound,
             std::numeric_limits<double>::quiet_NaN(), fb.passed);
    }

    const HpeMassReport hp =
        check_hpe_mass(model, 16, {0.5, 0.75, 1.0}, std::min<long>(samples, 20000), cfg.seed);
    note("hpe-mass-slope", hp.slope, hp.slope_sigma, -std::numeric_limits<double>::infinity(),
         -0.125, std::numeric_limits<double>::quiet_NaN(), hp.passed);

    OutputSink sink(cfg.out);
    t.write(sink.stream(), cfg.format);
    write_metadata(cfg);
    return all_pass ? 0 : 1;
}

inline int dispatch(const RunConfig& cfg) {
    if (cfg.command == "spectral-table") return cmd_spectral_table(cfg);
    if (cfg.command == "tau-convergence") return cmd_tau_convergence(cfg);
    if (cfg.command == "density-mc") return cmd_density_mc(cfg);
    if (cfg.command == "flat-sanity") return cmd_flat_sanity(cfg);
    if (cfg.command == "jacobi-verify") return cmd_jacobi_verify(cfg);
    if (cfg.command == "appendix-checks") return cmd_appendix_checks(cfg);
    throw UsageError("unknown command: " + cfg.command);
}

inline int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const RunConfig cfg = parse_config(args);
        return dispatch(cfg);
    } catch (const ModelDomainError& e) {
        std::cerr << "model domain error (non-positive sectional curvature required): "
                  << e.what() << std::endl;
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << std::endl;
        return 4;
    } catch (const UsageError& e) {
        if (std::string(e.what()) == "help requested") return 0;
        std::cerr << "usage error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}

}  // namespace pathweight::cli
