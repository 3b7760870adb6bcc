#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "holomodel/polynomial.hpp"
#include "holomodel/sampling.hpp"
#include "holomodel/types.hpp"

namespace holomodel {

struct RationalComponent {
    Poly num, den;
};

// Holomorphic map given componentwise by rational expressions.  Evaluation is
// exact rational arithmetic in double complex; Jacobians are analytic.
class MapExpr {
public:
    MapExpr() = default;
    MapExpr(DomainSpec domain, std::vector<RationalComponent> comps, std::string label = "")
        : domain_(domain), comps_(std::move(comps)), label_(std::move(label)) {
        if (static_cast<int>(comps_.size()) != domain_.dim)
            throw DomainMismatch("component count differs from domain dimension");
    }

    static MapExpr identity(DomainSpec X) {
        std::vector<RationalComponent> comps;
        for (int i = 0; i < X.dim; ++i)
            comps.push_back({Poly::variable(X.dim, i), Poly::constant(X.dim, 1.0)});
        return MapExpr(X, std::move(comps), "id");
    }

    const DomainSpec& domain() const { return domain_; }
    int dim() const { return domain_.dim; }
    const std::string& label() const { return label_; }
    const std::vector<RationalComponent>& components() const { return comps_; }

    CVec eval(const CVec& p, bool check_domain = true) const {
        if (p.size() != domain_.dim) throw DomainMismatch("point dimension mismatch");
        if (check_domain) domain_.require_inside(p, 1e-12);
        return eval_raw(p);
    }

    // No membership check; used for charts whose source is a different domain.
    CVec eval_raw(const CVec& p) const {
        CVec out(comps_.size());
        for (std::size_t i = 0; i < comps_.size(); ++i) {
            Complex den = comps_[i].den.eval(p);
            if (std::abs(den) <= 1e-14) throw PoleHit("denominator vanished in component " + std::to_string(i));
            out[i] = comps_[i].num.eval(p) / den;
        }
        return out;
    }

    CMat jacobian(const CVec& p) const {
        const int q = domain_.dim;
        CMat J(comps_.size(), q);
        for (std::size_t i = 0; i < comps_.size(); ++i) {
            Complex P = comps_[i].num.eval(p);
            Complex Q = comps_[i].den.eval(p);
            if (std::abs(Q) <= 1e-14) throw PoleHit("denominator vanished in component " + std::to_string(i));
            for (int j = 0; j < q; ++j) {
                Complex Pj = comps_[i].num.derivative(j).eval(p);
                Complex Qj = comps_[i].den.derivative(j).eval(p);
                J(i, j) = (Pj * Q - P * Qj) / (Q * Q);
            }
        }
        return J;
    }

    MapExpr with_domain(DomainSpec X) const { return MapExpr(X, comps_, label_); }
    MapExpr with_label(std::string l) const { return MapExpr(domain_, comps_, std::move(l)); }

private:
    DomainSpec domain_;
    std::vector<RationalComponent> comps_;
    std::string label_;
};

// ---------------------------------------------------------------------------
// Symbolic composition of rational components: outer(inner), with per-
// component common-denominator clearing.  Exact; used for chart conjugations.

inline std::vector<RationalComponent> compose_rational(const std::vector<RationalComponent>& outer,
                                                       const std::vector<RationalComponent>& inner) {
    const int m = static_cast<int>(inner.size()); // variables of outer
    const int nv = inner.empty() ? 0 : inner[0].num.nvars();
    std::vector<RationalComponent> out;
    out.reserve(outer.size());
    for (const auto& comp : outer) {
        if (comp.num.nvars() != m || comp.den.nvars() != m)
            throw DomainMismatch("composition arity mismatch");
        Poly::Exps A = comp.num.max_exponents();
        Poly::Exps Ad = comp.den.max_exponents();
        for (int j = 0; j < m; ++j) A[j] = std::max(A[j], Ad[j]);

        // cache powers of each inner numerator / denominator
        std::vector<std::vector<Poly>> Npow(m), Dpow(m);
        for (int j = 0; j < m; ++j) {
            Npow[j].push_back(Poly::constant(nv, 1.0));
            Dpow[j].push_back(Poly::constant(nv, 1.0));
            for (int k = 1; k <= A[j]; ++k) {
                Npow[j].push_back(Npow[j][k - 1] * inner[j].num);
                Dpow[j].push_back(Dpow[j][k - 1] * inner[j].den);
            }
        }
        auto substitute = [&](const Poly& p) {
            Poly acc(nv);
            for (const auto& [e, c] : p.terms()) {
                Poly t = Poly::constant(nv, c);
                for (int j = 0; j < m; ++j) {
                    t = t * Npow[j][e[j]];
                    t = t * Dpow[j][A[j] - e[j]];
                }
                acc = acc + t;
            }
            return acc;
        };
        out.push_back({substitute(comp.num), substitute(comp.den)});
    }
    return out;
}

inline MapExpr compose_symbolic(const MapExpr& outer, const MapExpr& inner) {
    return MapExpr(inner.domain(), compose_rational(outer.components(), inner.components()),
                   outer.label().empty() || inner.label().empty()
                       ? ""
                       : outer.label() + "∘" + inner.label());
}

// ---------------------------------------------------------------------------
// Type-erased holomorphic evaluator (limit objects, conjugated charts, ...).

struct HoloEval {
    DomainSpec domain; // input side
    int out_dim = 0;
    std::function<CVec(const CVec&)> fn;

    CVec operator()(const CVec& z) const { return fn(z); }
};

inline HoloEval to_eval(const MapExpr& f) {
    return HoloEval{f.domain(), f.dim(), [f](const CVec& z) { return f.eval(z, false); }};
}

// compose_maps(g, f) = g after f; the codomain condition is checked by
// sampling the domain of f.
inline HoloEval compose_maps(const HoloEval& g, const HoloEval& f, int check_samples = 32,
                             std::uint64_t seed = 0) {
    if (f.out_dim != g.domain.dim) throw DomainMismatch("composition dimension mismatch");
    for (const CVec& z : interior_samples(f.domain, check_samples, seed))
        if (!g.domain.contains(f(z), 1e-9))
            throw DomainMismatch("image of inner map leaves the domain of the outer map");
    return HoloEval{f.domain, g.out_dim,
                    [g, f](const CVec& z) { return g(f(z)); }};
}

inline HoloEval compose_maps(const MapExpr& g, const MapExpr& f, int check_samples = 32,
                             std::uint64_t seed = 0) {
    return compose_maps(to_eval(g), to_eval(f), check_samples, seed);
}

// ---------------------------------------------------------------------------
// Orbits.

struct Orbit {
    CVec base;
    std::vector<CVec> points; // points[n] = f^n(base)
    DomainSpec domain;
    bool truncated = false; // stopped at the numerical boundary guard

    int length() const { return static_cast<int>(points.size()); }
};

struct IterateOptions {
    long max_n = 1000000;
    double escape_slack = 1e-12; // tolerated overshoot before declaring escape
    double stop_gap = 0.0;       // truncate when boundary_gap falls below this
};

inline Orbit iterate(const MapExpr& f, long n, const CVec& p, const IterateOptions& opts = {}) {
    if (n < 0 || n > opts.max_n) throw Error("iteration count out of range");
    f.domain().require_inside(p, opts.escape_slack);
    Orbit orb{p, {p}, f.domain(), false};
    for (long i = 0; i < n; ++i) {
        CVec z = f.eval(orb.points.back(), false);
        double gap = f.domain().boundary_gap(z);
        if (gap < -opts.escape_slack)
            throw OrbitEscapedDomain("orbit left the domain at step " + std::to_string(i + 1) +
                                     " (not a self-map?)");
        if (gap < opts.stop_gap) {
            orb.truncated = true;
            break;
        }
        orb.points.push_back(std::move(z));
    }
    return orb;
}

// ---------------------------------------------------------------------------
// Sampling-based self-map validation.

struct ValidationReport {
    bool passed = false;
    double max_attained = 0.0; // sup |f| over the grid (ball) or max coord modulus
    std::optional<CVec> witness;
    int samples_used = 0;
};

inline ValidationReport validate_self_map(const MapExpr& f, int samples, std::uint64_t seed = 0) {
    ValidationReport rep;
    auto grid = interior_samples(f.domain(), samples, seed, 0.999);
    if (f.domain().kind != DomainKind::Siegel) {
        auto shell = shell_samples(f.domain(), std::max(samples / 4, 16), seed, 1e-4);
        grid.insert(grid.end(), shell.begin(), shell.end());
    }
    rep.samples_used = static_cast<int>(grid.size());
    rep.passed = true;
    for (const auto& z : grid) {
        CVec w;
        try {
            w = f.eval(z, false);
        } catch (const PoleHit&) {
            rep.passed = false;
            rep.witness = z;
            rep.max_attained = std::numeric_limits<double>::infinity();
            continue;
        }
        double mag = f.domain().kind == DomainKind::Ball ? w.norm() : sup_mod(w);
        if (f.domain().kind == DomainKind::Siegel)
            mag = f.domain().boundary_gap(w) > 0 ? 0.0 : 1.0; // inside/outside only
        if (mag > rep.max_attained) rep.max_attained = mag;
        if (f.domain().kind == DomainKind::Siegel ? mag >= 1.0 : mag >= 1.0) {
            if (rep.passed) rep.witness = z;
            rep.passed = false;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON serialization (see README for the schema).

namespace detail {

inline const nlohmann::json& jfield(const nlohmann::json& j, const char* key, const char* ctx) {
    if (!j.contains(key))
        throw ConfigError(std::string("missing field '") + key + "' in " + ctx);
    return j.at(key);
}

inline Complex parse_complex_pair(const nlohmann::json& j, const char* ctx) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(std::string("expected [re, im] pair in ") + ctx);
    return Complex(j[0].get<double>(), j[1].get<double>());
}

inline Poly parse_poly(const nlohmann::json& j, int nvars, const char* ctx) {
    if (!j.is_array()) throw ConfigError(std::string("expected term array in ") + ctx);
    Poly p(nvars);
    for (const auto& term : j) {
        if (!term.is_array() || term.size() != 2)
            throw ConfigError(std::string("expected [coeff, multi-index] term in ") + ctx);
        Complex c = parse_complex_pair(term[0], ctx);
        if (!term[1].is_array() || static_cast<int>(term[1].size()) != nvars)
            throw ConfigError(std::string("multi-index of wrong arity in ") + ctx);
        Poly::Exps e(nvars);
        for (int k = 0; k < nvars; ++k) {
            if (!term[1][k].is_number_integer() || term[1][k].get<int>() < 0)
                throw ConfigError(std::string("multi-index entries must be nonnegative integers in ") + ctx);
            e[k] = term[1][k].get<int>();
        }
        p.add_term(e, c);
    }
    return p;
}

inline nlohmann::json poly_to_json(const Poly& p) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [e, c] : p.terms()) {
        nlohmann::json t = nlohmann::json::array();
        t.push_back({c.real(), c.imag()});
        t.push_back(e);
        terms.push_back(t);
    }
    return terms;
}

} // namespace detail

inline DomainSpec domain_from_json(const nlohmann::json& j) {
    std::string kind = detail::jfield(j, "kind", "domain").get<std::string>();
    int dim = detail::jfield(j, "dim", "domain").get<int>();
    if (dim < 1) throw ConfigError("domain.dim must be positive");
    if (kind == "ball") return DomainSpec::ball(dim);
    if (kind == "polydisc") return DomainSpec::polydisc(dim);
    if (kind == "siegel") return DomainSpec::siegel(dim);
    throw ConfigError("domain.kind must be ball|polydisc|siegel, got '" + kind + "'");
}

inline nlohmann::json domain_to_json(const DomainSpec& X) {
    return {{"kind", domain_kind_name(X.kind)}, {"dim", X.dim}};
}

inline MapExpr map_from_json(const nlohmann::json& j) {
    DomainSpec X = domain_from_json(detail::jfield(j, "domain", "map"));
    const auto& jc = detail::jfield(j, "components", "map");
    if (!jc.is_array() || static_cast<int>(jc.size()) != X.dim)
        throw ConfigError("map.components must be an array of length domain.dim");
    std::vector<RationalComponent> comps;
    for (const auto& c : jc) {
        Poly num = detail::parse_poly(detail::jfield(c, "num", "component"), X.dim, "component.num");
        Poly den = detail::parse_poly(detail::jfield(c, "den", "component"), X.dim, "component.den");
        if (den.is_zero()) throw ConfigError("component.den must not be the zero polynomial");
        comps.push_back({num, den});
    }
    std::string label = j.contains("label") ? j.at("label").get<std::string>() : "";
    return MapExpr(X, std::move(comps), label);
}

inline nlohmann::json map_to_json(const MapExpr& f) {
    nlohmann::json j;
    j["domain"] = domain_to_json(f.domain());
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : f.components())
        comps.push_back({{"num", detail::poly_to_json(c.num)}, {"den", detail::poly_to_json(c.den)}});
    j["components"] = comps;
    if (!f.label().empty()) j["label"] = f.label();
    return j;
}

} // namespace holomodel
