#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "holomodel/backward_model.hpp"

namespace holomodel {

using ordered_json = nlohmann::ordered_json;

// Named tolerances with stated defaults; every numeric claim in a report
// carries the tolerance/horizon it was computed under.
struct Tolerances {
    DynamicsOptions dyn;
    ModelOptions model;
    BackwardOptions backward;

    void apply_seed(std::uint64_t seed) {
        dyn.seed = seed;
        model.seed = seed;
        model.dyn.seed = seed;
        backward.model.seed = seed;
        backward.model.dyn.seed = seed;
    }

    void apply_overrides(const nlohmann::json& j) {
        auto setd = [&](const char* key, double& slot) {
            if (j.contains(key)) {
                if (!j.at(key).is_number() || j.at(key).get<double>() <= 0.0)
                    throw ConfigError(std::string("tolerances.") + key + " must be a positive number");
                slot = j.at(key).get<double>();
            }
        };
        auto seti = [&](const char* key, int& slot) {
            if (j.contains(key)) {
                if (!j.at(key).is_number_integer() || j.at(key).get<int>() <= 0)
                    throw ConfigError(std::string("tolerances.") + key + " must be a positive integer");
                slot = j.at(key).get<int>();
            }
        };
        setd("boundary_cut", dyn.boundary_cut);
        setd("dilation_tol", dyn.dilation_tol);
        setd("rate_tol", dyn.rate_tol);
        setd("step_tol", dyn.step_tol);
        setd("step_positive_tol", dyn.step_positive_tol);
        setd("dilation_floor", dyn.dilation_floor);
        seti("dilation_depth", dyn.dilation_depth);
        seti("rate_m_max", dyn.rate_m_max);
        setd("limit_tol", model.limit_tol);
        seti("horizon_max", model.horizon_max);
        setd("svd_tol", model.svd_tol);
        setd("commute_tol", model.commute_tol);
        setd("valiron_tol", model.valiron_tol);
        seti("grid_size", model.grid_size);
        setd("step_cap", backward.step_cap);
        setd("approach_tol", backward.approach_tol);
        seti("newton_iters", backward.newton_iters);
        model.dyn = dyn;
        backward.model = model;
        backward.step_tol = dyn.step_tol;
    }

    ordered_json to_json() const {
        ordered_json j;
        j["boundary_cut"] = dyn.boundary_cut;
        j["dilation_depth"] = dyn.dilation_depth;
        j["dilation_floor"] = dyn.dilation_floor;
        j["dilation_tol"] = dyn.dilation_tol;
        j["rate_m_max"] = dyn.rate_m_max;
        j["rate_tol"] = dyn.rate_tol;
        j["step_tol"] = dyn.step_tol;
        j["step_positive_tol"] = dyn.step_positive_tol;
        j["limit_tol"] = model.limit_tol;
        j["horizon_max"] = model.horizon_max;
        j["svd_tol"] = model.svd_tol;
        j["commute_tol"] = model.commute_tol;
        j["valiron_tol"] = model.valiron_tol;
        j["grid_size"] = model.grid_size;
        j["step_cap"] = backward.step_cap;
        j["approach_tol"] = backward.approach_tol;
        j["newton_iters"] = backward.newton_iters;
        return j;
    }
};

// ---------------------------------------------------------------------------
// Deterministic writer: fixed field order (insertion order of ordered_json),
// floats with 17 significant digits, byte-identical output for identical
// values.

namespace detail {

inline void write_json(std::string& out, const ordered_json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += '"';
                out += it.key();
                out += "\":";
                write_json(out, it.value());
            }
            out += '}';
            break;
        }
        case nlohmann::json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += ',';
                first = false;
                write_json(out, v);
            }
            out += ']';
            break;
        }
        case nlohmann::json::value_t::number_float: {
            double v = j.get<double>();
            if (std::isfinite(v)) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out += buf;
            } else {
                out += v > 0 ? "\"infinity\"" : "\"-infinity\"";
            }
            break;
        }
        default:
            out += j.dump();
    }
}

} // namespace detail

inline std::string render_report(const ordered_json& j) {
    std::string out;
    detail::write_json(out, j);
    out += '\n';
    return out;
}

inline void emit_report(const ordered_json& j, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open report path '" + path + "' for writing");
    std::string body = render_report(j);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) throw IoError("write failed for report path '" + path + "'");
}

// ---------------------------------------------------------------------------
// JSON fragments for the result types.

inline ordered_json cvec_to_json(const CVec& v) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back({v[i].real(), v[i].imag()});
    return arr;
}

inline ordered_json boundary_point_to_json(const BoundaryPoint& b) {
    ordered_json j;
    j["infinity"] = b.infinity;
    if (!b.infinity) j["direction"] = cvec_to_json(b.direction);
    return j;
}

inline ordered_json classification_to_json(const ClassificationReport& rep,
                                           const DynamicsOptions& dyn) {
    ordered_json j;
    j["kind"] = map_class_name(rep.kind);
    if (rep.interior_fixed) j["fixed_point"] = cvec_to_json(*rep.interior_fixed);
    if (rep.dw) j["denjoy_wolff"] = boundary_point_to_json(*rep.dw);
    if (rep.dilation) {
        ordered_json d;
        d["value"] = *rep.dilation;
        d["method"] = "radial_estimate";
        d["depth"] = dyn.dilation_depth;
        d["deepest_sample"] = rep.dilation_detail.deepest_j;
        d["min_ratio"] = rep.dilation_detail.min_ratio;
        d["samples"] = rep.dilation_detail.ratios;
        j["dilation"] = d;
    }
    {
        ordered_json r;
        r["value"] = rep.rate.c;
        r["inf_form"] = rep.rate.c_inf_form;
        r["m_used"] = rep.rate.m_used;
        r["tail"] = rep.rate.tail;
        j["divergence_rate"] = r;
    }
    j["nonzero_step"] = rep.nonzero_step;
    j["step_min"] = rep.step_min;
    j["dw_iterations"] = rep.dw_iterations;
    j["warnings"] = rep.warnings;
    return j;
}

inline ordered_json semi_model_to_json(const SemiModel& m) {
    ordered_json j;
    j["retract_dim"] = m.retract_dim;
    j["kind"] = model_kind_name(m.kind);
    j["normal_form_available"] = m.normal_form_available;
    if (m.kind == ModelKind::Hyperbolic) j["lambda"] = m.lambda_model;
    if (m.kind == ModelKind::ParabolicAbelian) j["sign"] = m.sign;
    j["angles"] = m.angles;
    j["base_point"] = cvec_to_json(m.base_point);
    j["horizon"] = m.horizon;
    {
        ordered_json r;
        r["converged"] = m.limit_report.converged;
        r["oscillation_detected"] = m.limit_report.oscillation_detected;
        r["horizon_used"] = m.limit_report.horizon_used;
        r["sup_residual"] = m.limit_report.sup_residual;
        r["commutation"] = m.commutation_residual;
        r["slice"] = m.slice_residual;
        r["tau_fit"] = m.fit_residual;
        j["residuals"] = r;
    }
    j["rank_votes"] = m.rank_detail.votes;
    j["warnings"] = m.warnings;
    return j;
}

inline ordered_json pre_model_to_json(const PreModel& m) {
    ordered_json j;
    j["retract_dim"] = m.retract_dim;
    j["kind"] = "hyperbolic";
    j["normal_form_available"] = m.normal_form_available;
    j["mu"] = m.mu;
    j["mu_orbit"] = m.mu_orbit;
    j["lambda_at_zeta"] = m.lambda_zeta;
    j["angles"] = m.angles;
    {
        ordered_json r;
        r["converged"] = m.limit_report.converged;
        r["horizon_used"] = m.limit_report.horizon_used;
        r["sup_residual"] = m.limit_report.sup_residual;
        r["commutation"] = m.commutation_residual;
        r["tau_fit"] = m.fit_residual;
        j["residuals"] = r;
    }
    j["stable_spot_checks"] = m.stable_spot_checks;
    j["stable_spot_hits"] = m.stable_spot_hits;
    j["warnings"] = m.warnings;
    return j;
}

} // namespace holomodel
