#include "g2cal/g2pp.hpp"

#include <cmath>
#include <stdexcept>

namespace g2cal {

namespace {
constexpr double kMinMeanReversion = 1e-8;
}

void G2ppParams::validate() const {
    if (!(k_x > 0.0 && k_y > 0.0 && sigma_x > 0.0 && sigma_y > 0.0))
        throw std::domain_error("g2pp: k and sigma must be positive");
    if (k_x < kMinMeanReversion || k_y < kMinMeanReversion)
        throw std::domain_error("g2pp: mean reversion below 1e-8");
    if (rho < -1.0 || rho > 1.0)
        throw std::domain_error("g2pp: rho outside [-1, 1]");
}

bool G2ppParams::is_valid() const {
    return k_x >= kMinMeanReversion && k_y >= kMinMeanReversion &&
           sigma_x > 0.0 && sigma_y > 0.0 && rho >= -1.0 && rho <= 1.0;
}

double v_function(const G2ppParams& p, double t, double maturity) {
    p.validate();
    if (t > maturity) throw std::domain_error("v_function: t > T");
    const double tau = maturity - t;
    const double kx = p.k_x, ky = p.k_y;
    const double ex = std::exp(-kx * tau), ey = std::exp(-ky * tau);
    const double exy = std::exp(-(kx + ky) * tau);

    const double term_x = p.sigma_x * p.sigma_x / (kx * kx) *
        (tau + 2.0 / kx * ex - 0.5 / kx * ex * ex - 1.5 / kx);
    const double term_y = p.sigma_y * p.sigma_y / (ky * ky) *
        (tau + 2.0 / ky * ey - 0.5 / ky * ey * ey - 1.5 / ky);
    const double term_xy = 2.0 * p.rho * p.sigma_x * p.sigma_y / (kx * ky) *
        (tau + (ex - 1.0) / kx + (ey - 1.0) / ky - (exy - 1.0) / (kx + ky));
    return term_x + term_y + term_xy;
}

double v_function_dtau(const G2ppParams& p, double tau) {
    const double kx = p.k_x, ky = p.k_y;
    const double ex = std::exp(-kx * tau), ey = std::exp(-ky * tau);
    const double dx = p.sigma_x * p.sigma_x / (kx * kx) * (1.0 - 2.0 * ex + ex * ex);
    const double dy = p.sigma_y * p.sigma_y / (ky * ky) * (1.0 - 2.0 * ey + ey * ey);
    const double dxy = 2.0 * p.rho * p.sigma_x * p.sigma_y / (kx * ky) *
        (1.0 - ex - ey + ex * ey);
    return dx + dy + dxy;
}

double a_function(const G2ppParams& p, const FactorState& s, double maturity) {
    if (s.t > maturity) throw std::domain_error("a_function: t > T");
    const double tau = maturity - s.t;
    const double bx = (1.0 - std::exp(-p.k_x * tau)) / p.k_x;
    const double by = (1.0 - std::exp(-p.k_y * tau)) / p.k_y;
    const double v_combo = v_function(p, s.t, maturity) -
                           v_function(p, 0.0, maturity) +
                           v_function(p, 0.0, s.t);
    return 0.5 * v_combo - bx * s.x - by * s.y;
}

double zc_price(const G2ppParams& p, const FactorState& s,
                const MarketCurve& curve, double maturity) {
    if (s.t > maturity) throw std::domain_error("zc_price: t > T");
    return curve.discount(maturity) / curve.discount(s.t) *
           std::exp(a_function(p, s, maturity));
}

double zc_rate(const G2ppParams& p, const FactorState& s,
               const MarketCurve& curve, double maturity) {
    if (s.t >= maturity) throw std::domain_error("zc_rate: requires t < T");
    return -std::log(zc_price(p, s, curve, maturity)) / (maturity - s.t);
}

double fwd_rate(const G2ppParams& p, const FactorState& s,
                const MarketCurve& curve, double maturity) {
    if (s.t > maturity) throw std::domain_error("fwd_rate: t > T");
    p.validate();
    const double tau = maturity - s.t;
    // f = f^M(0,T) - dA/dT, with dA/dT = 1/2 [V'(tau) - V'(T)] on the
    // variance part and exponential decay on the factor part.
    const double model = -0.5 * (v_function_dtau(p, tau) - v_function_dtau(p, maturity)) +
                         std::exp(-p.k_x * tau) * s.x + std::exp(-p.k_y * tau) * s.y;
    return curve.instantaneous_forward(maturity) + model;
}

double expected_zc_rate(const G2ppParams& p, const MarketCurve& curve,
                        double t, double maturity) {
    if (t < 0.0 || t >= maturity)
        throw std::domain_error("expected_zc_rate: requires 0 <= t < T");
    const double tau = maturity - t;
    const double lnratio = std::log(curve.discount(maturity) / curve.discount(t));
    const double v_combo = v_function(p, t, maturity) -
                           v_function(p, 0.0, maturity) + v_function(p, 0.0, t);
    return -lnratio / tau - 0.5 * v_combo / tau;
}

Loadings loading(const G2ppParams& p, double tenor, CurveKind kind) {
    if (tenor <= 0.0) throw std::domain_error("loading: tenor must be positive");
    if (kind == CurveKind::ZC)
        return {p.sigma_x * (1.0 - std::exp(-p.k_x * tenor)) / (p.k_x * tenor),
                p.sigma_y * (1.0 - std::exp(-p.k_y * tenor)) / (p.k_y * tenor)};
    return {p.sigma_x * std::exp(-p.k_x * tenor),
            p.sigma_y * std::exp(-p.k_y * tenor)};
}

double cov_dG(const G2ppParams& p, double ti, double tj, CurveKind kind) {
    const Loadings li = loading(p, ti, kind), lj = loading(p, tj, kind);
    return li.x * lj.x + li.y * lj.y + p.rho * (li.x * lj.y + lj.x * li.y);
}

double corr_dG(const G2ppParams& p, double ti, double tj, CurveKind kind) {
    const double vi = cov_dG(p, ti, ti, kind);
    const double vj = cov_dG(p, tj, tj, kind);
    if (vi <= 0.0 || vj <= 0.0)
        throw std::domain_error("corr_dG: degenerate zero variance");
    return cov_dG(p, ti, tj, kind) / std::sqrt(vi * vj);
}

Eigen::MatrixXd cov_matrix(const G2ppParams& p,
                           const std::vector<double>& tenors, CurveKind kind,
                           Quantity quantity) {
    const auto n = static_cast<Eigen::Index>(tenors.size());
    for (size_t i = 1; i < tenors.size(); ++i)
        if (tenors[i] <= tenors[i - 1])
            throw std::invalid_argument("cov_matrix: tenors must be strictly increasing");
    std::vector<Loadings> l(tenors.size());
    for (size_t i = 0; i < tenors.size(); ++i) l[i] = loading(p, tenors[i], kind);

    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) {
            double c = l[i].x * l[j].x + l[i].y * l[j].y +
                       p.rho * (l[i].x * l[j].y + l[j].x * l[i].y);
            m(i, j) = m(j, i) = c;
        }
    if (quantity == Quantity::Corr) {
        Eigen::VectorXd d = m.diagonal().array().sqrt();
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) m(i, j) /= d(i) * d(j);
    }
    return m;
}

double get_param(const G2ppParams& p, ParamId id) {
    switch (id) {
        case ParamId::KX: return p.k_x;
        case ParamId::KY: return p.k_y;
        case ParamId::SigmaX: return p.sigma_x;
        case ParamId::SigmaY: return p.sigma_y;
        case ParamId::Rho: return p.rho;
    }
    throw std::logic_error("unreachable");
}

void set_param(G2ppParams& p, ParamId id, double value) {
    switch (id) {
        case ParamId::KX: p.k_x = value; return;
        case ParamId::KY: p.k_y = value; return;
        case ParamId::SigmaX: p.sigma_x = value; return;
        case ParamId::SigmaY: p.sigma_y = value; return;
        case ParamId::Rho: p.rho = value; return;
    }
    throw std::logic_error("unreachable");
}

const char* param_name(ParamId id) {
    switch (id) {
        case ParamId::KX: return "k_x";
        case ParamId::KY: return "k_y";
        case ParamId::SigmaX: return "sigma_x";
        case ParamId::SigmaY: return "sigma_y";
        case ParamId::Rho: return "rho";
    }
    return "?";
}

double sensitivity(const G2ppParams& p, ParamId param, double ti, double tj,
                   CurveKind kind, Quantity quantity) {
    auto eval = [&](const G2ppParams& q) {
        return quantity == Quantity::Cov ? cov_dG(q, ti, tj, kind)
                                         : corr_dG(q, ti, tj, kind);
    };
    const double v = get_param(p, param);
    double h = 1e-6 * std::max(std::abs(v), 1e-3);

    G2ppParams up = p, down = p;
    set_param(up, param, v + h);
    set_param(down, param, v - h);
    if (up.is_valid() && down.is_valid())
        return (eval(up) - eval(down)) / (2.0 * h);
    // One-sided fallback at the domain boundary (e.g. |rho| near 1).
    if (up.is_valid()) {
        G2ppParams up2 = p;
        set_param(up2, param, v + 2.0 * h);
        return (-3.0 * eval(p) + 4.0 * eval(up) - eval(up2)) / (2.0 * h);
    }
    G2ppParams down2 = p;
    set_param(down2, param, v - 2.0 * h);
    return (3.0 * eval(p) - 4.0 * eval(down) + eval(down2)) / (2.0 * h);
}

}  // namespace g2cal
