#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "holomodel/types.hpp"

namespace holomodel {

// Multivariate polynomial over C, kept in a canonical sorted-term form.
class Poly {
public:
    using Exps = std::vector<int>;

    Poly() = default;
    explicit Poly(int nvars) : nvars_(nvars) {}

    static Poly constant(int nvars, Complex c) {
        Poly p(nvars);
        if (c != 0.0) p.terms_[Exps(nvars, 0)] = c;
        return p;
    }
    static Poly variable(int nvars, int j, Complex coeff = 1.0) {
        Poly p(nvars);
        Exps e(nvars, 0);
        e[j] = 1;
        p.terms_[e] = coeff;
        return p;
    }

    int nvars() const { return nvars_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t term_count() const { return terms_.size(); }

    void add_term(const Exps& e, Complex c) {
        if (c == 0.0) return;
        auto it = terms_.find(e);
        if (it == terms_.end()) {
            terms_[e] = c;
        } else {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    Complex eval(const CVec& z) const {
        Complex acc = 0.0;
        for (const auto& [e, c] : terms_) {
            Complex t = c;
            for (int j = 0; j < nvars_; ++j)
                for (int k = 0; k < e[j]; ++k) t *= z[j];
            acc += t;
        }
        return acc;
    }

    Poly derivative(int j) const {
        Poly d(nvars_);
        for (const auto& [e, c] : terms_) {
            if (e[j] == 0) continue;
            Exps de = e;
            de[j] -= 1;
            d.add_term(de, c * double(e[j]));
        }
        return d;
    }

    Poly operator+(const Poly& o) const {
        Poly r = *this;
        for (const auto& [e, c] : o.terms_) r.add_term(e, c);
        return r;
    }
    Poly operator-(const Poly& o) const {
        Poly r = *this;
        for (const auto& [e, c] : o.terms_) r.add_term(e, -c);
        return r;
    }
    Poly operator*(const Poly& o) const {
        Poly r(nvars_);
        for (const auto& [e1, c1] : terms_)
            for (const auto& [e2, c2] : o.terms_) {
                Exps e = e1;
                for (int j = 0; j < nvars_; ++j) e[j] += e2[j];
                r.add_term(e, c1 * c2);
            }
        return r;
    }
    Poly scaled(Complex s) const {
        Poly r(nvars_);
        for (const auto& [e, c] : terms_) r.add_term(e, c * s);
        return r;
    }
    Poly pow(int n) const {
        Poly r = constant(nvars_, 1.0);
        for (int i = 0; i < n; ++i) r = r * *this;
        return r;
    }

    Exps max_exponents() const {
        Exps m(nvars_, 0);
        for (const auto& [e, c] : terms_) {
            (void)c;
            for (int j = 0; j < nvars_; ++j) m[j] = std::max(m[j], e[j]);
        }
        return m;
    }

    const std::map<Exps, Complex>& terms() const { return terms_; }

private:
    int nvars_ = 0;
    std::map<Exps, Complex> terms_;
};

} // namespace holomodel
