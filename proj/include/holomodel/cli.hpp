#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include "holomodel/report.hpp"

namespace holomodel {

struct JobConfig {
    std::string command; // classify | forward | backward | valiron | verify
    MapExpr map;
    CVec base_point;  // forward-side base (default the origin)
    CVec orbit_start; // backward orbit start
    BoundaryPoint zeta;
    bool has_zeta = false;
    int steps = 40;
    std::string direction = "forward"; // verify target
    Tolerances tol;
    std::uint64_t seed = 0;
    std::string report_name = "report.json";
    std::string orbit_csv_name = "orbit.csv";
    // optional user-supplied triple for verify: h as a rational map into H^k
    std::optional<MapExpr> user_h;
    std::optional<NormalForm> user_phi;
};

namespace detail {

inline CVec parse_point(const nlohmann::json& j, int dim, const char* field) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw ConfigError(std::string(field) + " must be an array of " + std::to_string(dim) +
                          " [re, im] pairs");
    CVec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = parse_complex_pair(j[i], field);
    return v;
}

} // namespace detail

inline JobConfig parse_job_config(const nlohmann::json& j, const std::string& command,
                                  const std::string& config_dir = ".") {
    JobConfig cfg;
    cfg.command = command;

    if (j.contains("map")) {
        cfg.map = map_from_json(j.at("map"));
    } else if (j.contains("map_file")) {
        std::filesystem::path p = j.at("map_file").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(config_dir) / p;
        std::ifstream f(p);
        if (!f) throw ConfigError("map_file '" + p.string() + "' does not exist");
        nlohmann::json mj;
        try {
            f >> mj;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("map_file '" + p.string() + "': " + e.what());
        }
        cfg.map = map_from_json(mj);
    } else {
        throw ConfigError("missing field 'map' (or 'map_file')");
    }

    const int q = cfg.map.dim();
    cfg.base_point = CVec::Zero(q);
    if (j.contains("base_point"))
        cfg.base_point = detail::parse_point(j.at("base_point"), q, "base_point");
    cfg.orbit_start = cfg.base_point;
    if (j.contains("orbit_start"))
        cfg.orbit_start = detail::parse_point(j.at("orbit_start"), q, "orbit_start");
    if (j.contains("zeta")) {
        cfg.zeta = BoundaryPoint::of(detail::parse_point(j.at("zeta"), q, "zeta"));
        cfg.has_zeta = true;
    }
    if (j.contains("steps")) {
        if (!j.at("steps").is_number_integer() || j.at("steps").get<int>() < 1)
            throw ConfigError("steps must be a positive integer");
        cfg.steps = j.at("steps").get<int>();
    }
    if (j.contains("direction")) {
        cfg.direction = j.at("direction").get<std::string>();
        if (cfg.direction != "forward" && cfg.direction != "backward")
            throw ConfigError("direction must be 'forward' or 'backward'");
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
            throw ConfigError("seed must be an unsigned integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("tolerances")) cfg.tol.apply_overrides(j.at("tolerances"));
    if (j.contains("report")) cfg.report_name = j.at("report").get<std::string>();
    if (j.contains("orbit_csv")) cfg.orbit_csv_name = j.at("orbit_csv").get<std::string>();

    if (j.contains("user_model")) {
        const auto& um = j.at("user_model");
        cfg.user_h = map_from_json(detail::jfield(um, "h", "user_model"));
        const auto& phi = detail::jfield(um, "phi", "user_model");
        NormalForm nf;
        std::string kind = detail::jfield(phi, "kind", "user_model.phi").get<std::string>();
        nf.k = cfg.user_h->dim();
        if (kind == "hyperbolic") {
            nf.kind = ModelKind::Hyperbolic;
            nf.rate = detail::jfield(phi, "lambda", "user_model.phi").get<double>();
        } else if (kind == "parabolic_abelian") {
            nf.kind = ModelKind::ParabolicAbelian;
            nf.sign = phi.contains("sign") ? phi.at("sign").get<int>() : 1;
        } else {
            throw ConfigError("user_model.phi.kind must be hyperbolic or parabolic_abelian");
        }
        if (phi.contains("angles"))
            nf.angles = phi.at("angles").get<std::vector<double>>();
        nf.angles.resize(std::max(0, nf.k - 1), 0.0);
        cfg.user_phi = nf;
    }

    if (command == "backward" && !cfg.has_zeta)
        throw ConfigError("backward requires the field 'zeta'");
    if (command == "verify" && cfg.direction == "backward" && !cfg.has_zeta)
        throw ConfigError("verify --direction backward requires the field 'zeta'");
    cfg.tol.apply_seed(cfg.seed);
    return cfg;
}

inline JobConfig load_job_config(const std::string& path, const std::string& command) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config file '" + path + "' does not exist");
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_job_config(j, command, std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------

struct CommandResult {
    int exit_code = 0;
    ordered_json report;
    std::vector<std::string> files_written;
};

namespace detail {

inline ordered_json verification_to_json(const SemiModelVerification& v) {
    ordered_json j;
    j["degenerate"] = v.degenerate;
    j["commutation"] = v.commutation;
    ordered_json pb = ordered_json::array();
    for (auto& [m, r] : v.pullback) pb.push_back({{"m", m}, {"residual", r}});
    j["pullback"] = pb;
    j["pullback_monotone"] = v.pullback_monotone;
    j["exhaustion_covered"] = v.exhaustion_covered;
    j["exhaustion_targets"] = v.exhaustion_targets;
    return j;
}

inline ordered_json verification_to_json(const PreModelVerification& v) {
    ordered_json j;
    j["degenerate"] = v.degenerate;
    j["commutation"] = v.commutation;
    ordered_json pb = ordered_json::array();
    for (auto& [m, r] : v.pullback) pb.push_back({{"m", m}, {"residual", r}});
    j["pullback"] = pb;
    j["pullback_monotone"] = v.pullback_monotone;
    j["boundary_residual"] = v.boundary_residual;
    j["mu"] = v.mu;
    j["lambda_at_zeta"] = v.lambda;
    return j;
}

} // namespace detail

inline CommandResult run_command(const JobConfig& cfg, const std::string& out_dir = ".") {
    CommandResult res;
    ordered_json& rep = res.report;
    rep["command"] = cfg.command;
    if (!cfg.map.label().empty()) rep["map_label"] = cfg.map.label();
    rep["seed"] = cfg.seed;

    std::filesystem::create_directories(out_dir);
    auto finalize = [&](int code) {
        rep["tolerances"] = cfg.tol.to_json();
        std::string path = (std::filesystem::path(out_dir) / cfg.report_name).string();
        emit_report(rep, path);
        res.files_written.push_back(path);
        res.exit_code = code;
        return res;
    };

    try {
        ValidationReport val = validate_self_map(cfg.map, 400, cfg.seed);
        {
            ordered_json v;
            v["passed"] = val.passed;
            v["max_attained"] = val.max_attained;
            v["samples"] = val.samples_used;
            if (val.witness) v["witness"] = cvec_to_json(*val.witness);
            rep["self_map_validation"] = v;
        }
        if (!val.passed) {
            rep["error"] = "map is not a self-map of its domain";
            return finalize(2);
        }

        if (cfg.command == "classify") {
            ClassificationReport cls = classify_map(cfg.map, cfg.tol.dyn);
            rep["classification"] = classification_to_json(cls, cfg.tol.dyn);
            return finalize(0);
        }

        if (cfg.command == "forward" || cfg.command == "valiron" ||
            (cfg.command == "verify" && cfg.direction == "forward" && !cfg.user_h)) {
            SemiModel model = canonical_semi_model(cfg.map, cfg.base_point, cfg.tol.model);
            rep["classification"] = classification_to_json(model.classification, cfg.tol.dyn);
            rep["model"] = semi_model_to_json(model);
            if (cfg.command == "valiron") {
                ValironReport vr = valiron_map(cfg.map, model, cfg.tol.model);
                ordered_json v;
                v["lambda"] = vr.lambda;
                v["residual"] = vr.residual;
                v["min_im"] = vr.min_im;
                v["grid_size"] = cfg.tol.model.grid_size;
                rep["valiron"] = v;
            }
            if (cfg.command == "verify" || cfg.command == "forward") {
                auto grid = interior_samples(cfg.map.domain(), cfg.tol.model.grid_size,
                                             cfg.seed ^ 0xfee1, 0.7);
                rep["verification"] =
                    detail::verification_to_json(verify_semi_model(cfg.map, model, grid, cfg.tol.model));
            }
            return finalize(0);
        }

        if (cfg.command == "backward" || (cfg.command == "verify" && cfg.direction == "backward")) {
            BackwardOrbit orb =
                backward_orbit(cfg.map, cfg.orbit_start, cfg.zeta, cfg.steps, cfg.tol.backward);
            {
                ordered_json o;
                o["length"] = orb.length();
                o["lambda_at_zeta"] = orb.lambda_zeta;
                o["bounded_certified"] = orb.bounded_certified;
                o["approach_certified"] = orb.approach_certified;
                o["step_bound"] = orb.step_bound;
                rep["orbit"] = o;
            }
            StepEstimate s1 = backward_step_sigma(orb, 1, cfg.tol.backward);
            {
                ordered_json s;
                s["value"] = s1.value;
                s["n_star"] = s1.n_star;
                s["converged"] = s1.converged;
                rep["sigma1"] = s;
            }
            BackwardRate mu = backward_rate_mu(orb, 12, cfg.tol.backward);
            {
                ordered_json m;
                m["value"] = mu.mu;
                m["m_used"] = mu.m_used;
                m["per_m"] = mu.per_m;
                rep["mu"] = m;
            }
            PreModel model = canonical_pre_model(cfg.map, orb, cfg.tol.backward);
            rep["model"] = pre_model_to_json(model);
            rep["verification"] = detail::verification_to_json(
                verify_pre_model(cfg.map, model, orb, 12, cfg.tol.backward));
            if (cfg.command == "backward") {
                std::string csv_path =
                    (std::filesystem::path(out_dir) / cfg.orbit_csv_name).string();
                std::ofstream csv(csv_path, std::ios::binary);
                if (!csv) throw IoError("cannot open '" + csv_path + "' for writing");
                csv << backward_orbit_csv(orb);
                res.files_written.push_back(csv_path);
                rep["orbit_csv"] = cfg.orbit_csv_name;
            }
            return finalize(0);
        }

        if (cfg.command == "verify" && cfg.user_h) {
            // commutation check of a user-supplied triple (Lambda, h, phi)
            const MapExpr& h = *cfg.user_h;
            const NormalForm& phi = *cfg.user_phi;
            double resid = 0.0;
            for (const CVec& x :
                 interior_samples(cfg.map.domain(), cfg.tol.model.grid_size, cfg.seed, 0.7)) {
                CVec a = h.eval_raw(cfg.map.eval(x, false));
                CVec b = phi.apply(h.eval_raw(x));
                resid = std::max(resid, siegel_distance(a, b));
            }
            ordered_json v;
            v["commutation"] = resid;
            v["grid_size"] = cfg.tol.model.grid_size;
            rep["user_model_verification"] = v;
            return finalize(0);
        }

        throw ConfigError("unknown command '" + cfg.command + "'");
    } catch (const ModelNotConverged& e) {
        rep["error"] = e.what();
        return finalize(2);
    } catch (const NewtonFailed& e) {
        rep["error"] = e.what();
        return finalize(2);
    } catch (const StepUnbounded& e) {
        rep["error"] = e.what();
        return finalize(2);
    } catch (const NotRepelling& e) {
        rep["error"] = e.what();
        return finalize(2);
    } catch (const NoConvergence& e) {
        rep["error"] = e.what();
        return finalize(2);
    }
}

} // namespace holomodel
