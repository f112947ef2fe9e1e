#pragma once

// Command-line front end. run_cli() is the whole program; tools/main.cpp only
// forwards argv and the standard streams.
//
// Exit codes: 0 success, 2 usage or domain error, 3 numeric failure,
// 4 non-convergence or model rejection (output files are still written).

#include <cmc/delaunay.hpp>
#include <cmc/end_fit.hpp>
#include <cmc/errors.hpp>
#include <cmc/fredholm.hpp>
#include <cmc/jacobi.hpp>
#include <cmc/neighbor.hpp>
#include <cmc/nonlinear.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace cmc::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 2;
inline constexpr int exit_numeric = 3;
inline constexpr int exit_rejected = 4;

using Json = nlohmann::ordered_json;

struct GlobalOptions {
    std::string out_dir = ".";
    std::optional<double> tol;
    std::uint64_t seed = 1;
};

namespace detail {

/// %.17g, so that CSV round-trips doubles exactly.
inline std::string fmt(double x)
{
    if (std::isnan(x))
        return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json payload()
{
    Json j;
    j["schema"] = 1;
    return j;
}

inline std::filesystem::path prepare_out(const GlobalOptions& g)
{
    std::filesystem::path p(g.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec)
        throw DomainError("cannot create output directory " + g.out_dir + ": " + ec.message());
    return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw DomainError("cannot write " + p.string());
    f << text;
}

inline void write_json(const std::filesystem::path& p, const Json& j) { write_file(p, j.dump(2) + "\n"); }

inline std::string profile_csv(const DelaunayProfile& prof)
{
    std::ostringstream s;
    s << "t,rho,rho_t\n";
    for (const auto& x : prof.samples())
        s << fmt(x.t) << ',' << fmt(x.rho) << ',' << fmt(x.rho_t) << '\n';
    return s.str();
}

/// Triangulated surface of a periodic-in-theta graph.
inline std::string mesh_obj(const CylindricalGraph& g)
{
    std::ostringstream s;
    const Eigen::Index nt = g.n_t(), nth = g.n_theta();
    for (Eigen::Index i = 0; i < nt; ++i)
        for (Eigen::Index j = 0; j < nth; ++j) {
            const Eigen::Vector3d p = g.point(i, j);
            s << "v " << fmt(p.x()) << ' ' << fmt(p.y()) << ' ' << fmt(p.z()) << '\n';
        }
    auto id = [&](Eigen::Index i, Eigen::Index j) { return i * nth + (j % nth) + 1; };
    for (Eigen::Index i = 0; i + 1 < nt; ++i)
        for (Eigen::Index j = 0; j < nth; ++j) {
            s << "f " << id(i, j) << ' ' << id(i + 1, j) << ' ' << id(i + 1, j + 1) << '\n';
            s << "f " << id(i, j) << ' ' << id(i + 1, j + 1) << ' ' << id(i, j + 1) << '\n';
        }
    return s.str();
}

/// Plain key = value lines; '#' starts a comment.
inline std::map<std::string, std::string> read_key_values(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw DomainError("cannot read config " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int n = 0;
    while (std::getline(f, line)) {
        ++n;
        if (auto h = line.find('#'); h != std::string::npos)
            line.erase(h);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DomainError("config line " + std::to_string(n) + ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline double parse_double(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size())
        throw DomainError("config key " + key + ": not a number: " + v);
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw DomainError("config key " + key + ": not a boolean: " + v);
}

inline std::vector<Eigen::Vector3d> read_points_csv(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw DomainError("cannot read " + path);
    std::string header;
    if (!std::getline(f, header))
        throw DomainError(path + ": empty file");
    if (!header.empty() && header.back() == '\r')
        header.pop_back();
    const bool graph = header == "t,theta,rho";
    if (!graph && header != "x,y,z")
        throw DomainError(path + ": header must be x,y,z or t,theta,rho");
    std::vector<Eigen::Vector3d> pts;
    std::string line;
    int n = 1;
    while (std::getline(f, line)) {
        ++n;
        if (line.empty() || line == "\r")
            continue;
        std::istringstream s(line);
        double v[3];
        char c1 = 0, c2 = 0;
        if (!(s >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',')
            throw DomainError(path + ": malformed line " + std::to_string(n));
        if (graph)
            pts.emplace_back(v[2] * std::cos(v[1]), v[2] * std::sin(v[1]), v[0]);
        else
            pts.emplace_back(v[0], v[1], v[2]);
    }
    return pts;
}

inline Json vec_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

} // namespace detail

/// delaunay: profile CSV, invariants JSON and optional OBJ mesh.
struct DelaunayCmd {
    double epsilon = 0.0;
    int samples = 256;
    bool mesh = false;
    int n_theta = 32;
    int periods = 2;

    int run(const GlobalOptions& g, std::ostream& out) const
    {
        const auto prof = solve_profile(epsilon, static_cast<std::size_t>(samples), g.tol.value_or(1e-10));
        const auto dir = detail::prepare_out(g);
        detail::write_file(dir / "profile.csv", detail::profile_csv(prof));
        Json j = detail::payload();
        j["epsilon"] = epsilon;
        j["period"] = prof.period();
        j["bulge"] = prof.bulge();
        j["energy"] = prof.energy();
        detail::write_json(dir / "invariants.json", j);
        if (mesh) {
            const auto graph = embed_profile(prof, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), n_theta, periods);
            detail::write_file(dir / "mesh.obj", detail::mesh_obj(graph));
        }
        out << j.dump(2) << '\n';
        return exit_ok;
    }
};

/// spectrum: monodromy sweep over epsilon and modes, and Gamma per epsilon.
struct SpectrumCmd {
    std::vector<double> epsilons;
    int m_max = 4;
    int samples = 512;

    int run(const GlobalOptions& g, std::ostream& out) const
    {
        std::ostringstream csv;
        csv << "epsilon,m,trace,class,re_exponent\n";
        Json j = detail::payload();
        Json per = Json::array();
        MonodromyOptions mo;
        if (g.tol)
            mo.tol = *g.tol;
        for (double e : epsilons) {
            const auto prof = solve_profile(e, static_cast<std::size_t>(samples));
            for (int m = 0; m <= m_max; ++m) {
                const auto r = monodromy_of(mode_operator(prof, m), mo);
                const double re = std::max(std::abs(r.exponents.first.real()), std::abs(r.exponents.second.real()));
                csv << detail::fmt(e) << ',' << m << ',' << detail::fmt(r.trace) << ',' << to_string(r.classification)
                    << ',' << detail::fmt(re) << '\n';
            }
            Json entry;
            entry["epsilon"] = e;
            entry["m_max"] = m_max;
            entry["gamma"] = gamma_weights(prof, m_max, mo);
            per.push_back(entry);
        }
        j["weights"] = per;
        const auto dir = detail::prepare_out(g);
        detail::write_file(dir / "monodromy.csv", csv.str());
        detail::write_json(dir / "gamma.json", j);
        out << csv.str();
        return exit_ok;
    }
};

/// index: integer bookkeeping for k ends plus Gamma of a model end.
struct IndexCmd {
    int ends = 0;
    double epsilon = 1.0;
    int m_max = 3;

    int run(const GlobalOptions& g, std::ostream& out) const
    {
        const auto prof = solve_profile(epsilon, 512);
        const auto rep = index_report(ends, prof, m_max);
        Json j = detail::payload();
        j["ends"] = rep.ends;
        j["relative_index"] = rep.relative_index;
        j["bounded_nullspace_dim"] = rep.bounded_nullspace_dim;
        j["moduli_dim_euclidean"] = rep.moduli_dim_euclidean;
        j["moduli_dim_hyperbolic"] = rep.moduli_dim_hyperbolic;
        j["gamma"] = rep.gamma;
        detail::write_json(detail::prepare_out(g) / "index.json", j);
        out << j.dump(2) << '\n';
        return exit_ok;
    }
};

/// newton: recover the neighbour D_{base + eta} as a periodic normal graph.
struct NewtonCmd {
    std::string config;
    double base = 0.7;
    double target_eta = 0.05;
    int n_t = 64;
    int n_theta = 16;
    double noise = 1e-3;
    int max_iter = 20;
    bool relax_period = false;
    bool solution_csv = true;

    /// Config keys fill in whatever was not given on the command line.
    void apply_config(const CLI::App& sub)
    {
        if (config.empty())
            return;
        for (const auto& [k, v] : detail::read_key_values(config)) {
            auto given = [&](const char* opt) { return sub.count(opt) > 0; };
            if (k == "base") {
                if (!given("--base"))
                    base = detail::parse_double(k, v);
            } else if (k == "target_eta") {
                if (!given("--target-eta"))
                    target_eta = detail::parse_double(k, v);
            } else if (k == "n_t") {
                if (!given("--n-t"))
                    n_t = static_cast<int>(detail::parse_double(k, v));
            } else if (k == "n_theta") {
                if (!given("--n-theta"))
                    n_theta = static_cast<int>(detail::parse_double(k, v));
            } else if (k == "noise") {
                if (!given("--noise"))
                    noise = detail::parse_double(k, v);
            } else if (k == "max_iter") {
                if (!given("--max-iter"))
                    max_iter = static_cast<int>(detail::parse_double(k, v));
            } else if (k == "relax_period") {
                if (!given("--relax-period"))
                    relax_period = detail::parse_bool(k, v);
            } else if (k == "solution_csv") {
                solution_csv = detail::parse_bool(k, v);
            } else if (k == "tol") {
                config_tol = detail::parse_double(k, v);
            } else {
                throw DomainError("config: unknown key " + k);
            }
        }
    }

    int run(const GlobalOptions& g, std::ostream& out) const
    {
        cmc::detail::require(n_t >= 8, "newton: n_t must be at least 8");
        cmc::detail::require(n_theta >= 8 && n_theta % 2 == 0, "newton: n_theta must be even and >= 8");
        cmc::detail::require(noise >= 0.0, "newton: noise must be nonnegative");
        const double tol = g.tol.value_or(config_tol.value_or(1e-10));

        const auto prof = solve_profile(base, static_cast<std::size_t>(n_t));
        const auto target = solve_profile(base + target_eta, dense_profile_samples);
        const double scale = target.period() / prof.period();
        const auto u = delaunay_neighbor_graph(base, target_eta, static_cast<std::size_t>(n_t), true);
        auto field = NormalGraphField::zero(prof, n_theta, relax_period ? 1.0 : scale);
        for (Eigen::Index i = 0; i < n_t; ++i)
            field.phi.row(i).setConstant(u[static_cast<std::size_t>(i)]);
        field.phi += uniform_noise(n_t, n_theta, noise, g.seed);

        GaugeSpec gauge;
        gauge.relax_period = relax_period;
        const auto rep = newton_solve(prof, field, gauge, tol, max_iter);

        Json j = detail::payload();
        j["iterations"] = rep.iterations;
        j["residuals"] = rep.residual_history;
        j["converged"] = rep.converged;
        j["axial_scale"] = rep.solution.axial_scale;
        const auto dir = detail::prepare_out(g);
        detail::write_json(dir / "newton.json", j);
        if (solution_csv) {
            std::ostringstream s;
            s << "t,theta,phi\n";
            for (Eigen::Index i = 0; i < n_t; ++i)
                for (Eigen::Index k = 0; k < n_theta; ++k)
                    s << detail::fmt(prof.samples()[static_cast<std::size_t>(i)].t) << ','
                      << detail::fmt(rep.solution.theta(k)) << ',' << detail::fmt(rep.solution.phi(i, k)) << '\n';
            detail::write_file(dir / "solution.csv", s.str());
        }
        out << j.dump(2) << '\n';
        return rep.converged ? exit_ok : exit_rejected;
    }

    std::optional<double> config_tol;
};

/// fit: asymptotic Delaunay fit of an end; --synthetic first writes a
/// generated end to OUT/end.csv and fits that.
struct FitCmd {
    std::string input;
    bool synthetic = false;
    double epsilon = 0.6;
    double amplitude = 0.05;
    double rate = 1.2;
    double t_max = 16.0;
    double dt = 0.04;
    double noise = 0.0;
    std::vector<double> window;

    int run(const GlobalOptions& g, std::ostream& out) const
    {
        const auto dir = detail::prepare_out(g);
        std::vector<Eigen::Vector3d> pts;
        if (synthetic) {
            const auto frame = Frame::from_axis(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());
            const auto graph = perturbed_delaunay_end(epsilon, frame, t_max, dt, 16, amplitude, rate);
            const Grid jitter = uniform_noise(graph.n_t(), graph.n_theta(), noise, g.seed);
            std::ostringstream s;
            s << "x,y,z\n";
            for (Eigen::Index i = 0; i < graph.n_t(); ++i)
                for (Eigen::Index k = 0; k < graph.n_theta(); ++k) {
                    const Eigen::Vector3d p = graph.point(i, k) + jitter(i, k) * graph.omega(k);
                    s << detail::fmt(p.x()) << ',' << detail::fmt(p.y()) << ',' << detail::fmt(p.z()) << '\n';
                }
            detail::write_file(dir / "end.csv", s.str());
            pts = detail::read_points_csv((dir / "end.csv").string());
        } else {
            if (input.empty())
                throw CLI::RequiredError("--input or --synthetic");
            pts = detail::read_points_csv(input);
        }
        EndSample sample{std::move(pts), std::nullopt};
        if (!window.empty()) {
            cmc::detail::require(window.size() == 2 && window[0] < window[1], "fit: --window takes T_MIN T_MAX");
            sample.window = std::pair{window[0], window[1]};
        }
        const auto f = fit_end(sample);

        Json j = detail::payload();
        j["epsilon"] = f.epsilon;
        Json axis;
        axis["point"] = detail::vec_json(f.axis_point);
        axis["direction"] = detail::vec_json(f.axis_direction);
        j["axis"] = axis;
        j["phase"] = f.phase;
        j["C"] = f.amplitude;
        j["lambda"] = detail::number_or_null(f.decay_rate);
        j["r2"] = detail::number_or_null(f.r2);
        j["status"] = to_string(f.status);
        detail::write_json(dir / "fit.json", j);
        out << j.dump(2) << '\n';
        return f.status == FitStatus::rejected ? exit_rejected : exit_ok;
    }
};

/// jacobi-fields: the six geometric Jacobi fields of one period with their
/// growth tags and discrete L-residuals.
struct JacobiFieldsCmd {
    double epsilon = 0.0;
    int samples = 128;
    int n_theta = 16;
    double eta = 1e-4;

    int run(const GlobalOptions& g, std::ostream& out) const
    {
        const auto prof = solve_profile(epsilon, static_cast<std::size_t>(samples));
        const auto basis = geometric_jacobi_fields(prof, eta, n_theta);
        const JacobiOperator op(prof);
        const char* names[6] = {"phi_0_1", "phi_0_2", "phi_1_1_cos", "phi_1_1_sin", "phi_1_2_cos", "phi_1_2_sin"};
        const auto all = basis.all();

        Json j = detail::payload();
        j["epsilon"] = epsilon;
        Json fields = Json::array();
        for (std::size_t k = 0; k < 6; ++k) {
            Json f;
            f["name"] = names[k];
            f["growth"] = to_string(all[k]->tag);
            f["residual_sup"] = op.apply(all[k]->field).cwiseAbs().maxCoeff();
            fields.push_back(f);
        }
        j["fields"] = fields;

        std::ostringstream s;
        s << "t,theta";
        for (const char* n : names)
            s << ',' << n;
        s << '\n';
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(prof.size()); ++i)
            for (Eigen::Index c = 0; c < n_theta; ++c) {
                s << detail::fmt(prof.samples()[static_cast<std::size_t>(i)].t) << ','
                  << detail::fmt(2.0 * std::numbers::pi * static_cast<double>(c) / n_theta);
                for (const auto* f : all)
                    s << ',' << detail::fmt(f->field.values(i, c));
                s << '\n';
            }
        const auto dir = detail::prepare_out(g);
        detail::write_file(dir / "jacobi_fields.csv", s.str());
        detail::write_json(dir / "jacobi_fields.json", j);
        out << j.dump(2) << '\n';
        return exit_ok;
    }
};

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Delaunay surfaces, Jacobi spectra and CMC end bookkeeping", "cmc"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
    auto* tol_opt = app.add_option("--tol", g.tol, "Tolerance passed to the numerical kernel");
    tol_opt->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Seed for synthetic noise")->capture_default_str();

    DelaunayCmd dcmd;
    auto* d = app.add_subcommand("delaunay", "Profile, invariants and mesh of D_epsilon");
    d->add_option("--epsilon", dcmd.epsilon, "Neck radius in (0, 1]")->required();
    d->add_option("--samples", dcmd.samples, "Samples per period")->capture_default_str();
    d->add_flag("--mesh", dcmd.mesh, "Also write mesh.obj");
    d->add_option("--n-theta", dcmd.n_theta, "Mesh points around the axis")->capture_default_str();
    d->add_option("--periods", dcmd.periods, "Mesh periods")->capture_default_str();

    SpectrumCmd scmd;
    auto* s = app.add_subcommand("spectrum", "Monodromy sweep and Floquet weights");
    s->add_option("--epsilon", scmd.epsilons, "Neck radii in (0, 1]")->required()->delimiter(',');
    s->add_option("--mmax", scmd.m_max, "Largest Fourier mode")->capture_default_str();
    s->add_option("--samples", scmd.samples, "Profile samples per period")->capture_default_str();

    IndexCmd icmd;
    auto* ix = app.add_subcommand("index", "Relative index, bounded nullspace and moduli dimensions");
    ix->add_option("--ends", icmd.ends, "Number of ends k >= 2")->required();
    ix->add_option("--epsilon", icmd.epsilon, "Neck radius of the model end used for Gamma")->capture_default_str();
    ix->add_option("--mmax", icmd.m_max, "Largest Fourier mode in Gamma")->capture_default_str();

    NewtonCmd ncmd;
    auto* n = app.add_subcommand("newton", "Recover a neighbouring Delaunay surface by Newton iteration");
    n->add_option("--config", ncmd.config, "key = value file (base, target_eta, n_t, n_theta, noise, max_iter, "
                                           "relax_period, solution_csv, tol)");
    n->add_option("--base", ncmd.base, "Base neck radius")->capture_default_str();
    n->add_option("--target-eta", ncmd.target_eta, "Target is D_{base + eta}")->capture_default_str();
    n->add_option("--n-t", ncmd.n_t, "Grid points per period")->capture_default_str();
    n->add_option("--n-theta", ncmd.n_theta, "Grid points around the axis")->capture_default_str();
    n->add_option("--noise", ncmd.noise, "Uniform noise added to the initial guess")->capture_default_str();
    n->add_option("--max-iter", ncmd.max_iter, "Newton iteration limit")->capture_default_str();
    n->add_flag("--relax-period", ncmd.relax_period, "Treat the period as an unknown");

    FitCmd fcmd;
    auto* f = app.add_subcommand("fit", "Fit an asymptotic Delaunay surface to end samples");
    f->add_option("--input", fcmd.input, "CSV with header x,y,z or t,theta,rho");
    f->add_flag("--synthetic", fcmd.synthetic, "Generate OUT/end.csv and fit it");
    f->add_option("--epsilon", fcmd.epsilon, "Synthetic: neck radius")->capture_default_str();
    f->add_option("--amplitude", fcmd.amplitude, "Synthetic: perturbation amplitude")->capture_default_str();
    f->add_option("--rate", fcmd.rate, "Synthetic: perturbation decay rate")->capture_default_str();
    f->add_option("--t-max", fcmd.t_max, "Synthetic: end length")->capture_default_str();
    f->add_option("--dt", fcmd.dt, "Synthetic: axial spacing")->capture_default_str();
    f->add_option("--noise", fcmd.noise, "Synthetic: uniform radial noise")->capture_default_str();
    f->add_option("--window", fcmd.window, "Fit only T_MIN <= t <= T_MAX")->expected(2);

    JacobiFieldsCmd jcmd;
    auto* jf = app.add_subcommand("jacobi-fields", "Geometric Jacobi fields of D_epsilon");
    jf->add_option("--epsilon", jcmd.epsilon, "Neck radius in (0, 1]")->required();
    jf->add_option("--samples", jcmd.samples, "Samples per period")->capture_default_str();
    jf->add_option("--n-theta", jcmd.n_theta, "Points around the axis")->capture_default_str();
    jf->add_option("--eta", jcmd.eta, "Parameter step for phi_0_2")->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }

    try {
        if (d->parsed())
            return dcmd.run(g, out);
        if (s->parsed())
            return scmd.run(g, out);
        if (ix->parsed())
            return icmd.run(g, out);
        if (n->parsed()) {
            ncmd.apply_config(*n);
            return ncmd.run(g, out);
        }
        if (f->parsed())
            return fcmd.run(g, out);
        if (jf->parsed())
            return jcmd.run(g, out);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << '\n';
        return exit_usage;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return exit_numeric;
    } catch (const FitError& e) {
        err << "fit error: " << e.what() << '\n';
        return exit_numeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_numeric;
    }
    err << "error: no command\n";
    return exit_usage;
}

} // namespace cmc::cli
