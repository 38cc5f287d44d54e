#pragma once

#include <Eigen/Dense>
#include <vector>

#include "g2cal/curve.hpp"

namespace g2cal {

/// The five calibration targets of the two-factor Gaussian model.
struct G2ppParams {
    double k_x;      // mean-reversion speed, factor x
    double k_y;      // mean-reversion speed, factor y
    double sigma_x;  // volatility, factor x
    double sigma_y;  // volatility, factor y
    double rho;      // factor correlation

    void validate() const;
    bool is_valid() const;
};

/// Reference parameters from the market calibration the sampling ranges
/// are extended from.
inline G2ppParams reference_params() {
    return {0.07173132, 0.08930784, 0.09465584, 0.094675523, -0.999318};
}

struct FactorState {
    double x = 0.0;
    double y = 0.0;
    double t = 0.0;  // years, >= 0
};

enum class CurveKind { ZC, FWD };
enum class Quantity { Cov, Corr };
enum class ParamId { KX, KY, SigmaX, SigmaY, Rho };

/// Integrated variance V(t,T) of ln P(t,T); zero at t = T.
double v_function(const G2ppParams& p, double t, double maturity);

/// dV(t,t+tau)/dtau, used by the forward rate.
double v_function_dtau(const G2ppParams& p, double tau);

/// Log-price adjustment A(t,T) at factor state s.
double a_function(const G2ppParams& p, const FactorState& s, double maturity);

/// Zero-coupon bond price P(t,T) off the initial market curve.
double zc_price(const G2ppParams& p, const FactorState& s,
                const MarketCurve& curve, double maturity);

/// Continuously compounded zero rate, P(t,T) = exp(-(T-t) Z(t,T)).
double zc_rate(const G2ppParams& p, const FactorState& s,
               const MarketCurve& curve, double maturity);

/// Instantaneous forward rate f(t,T) = -d/dT ln P(t,T).
double fwd_rate(const G2ppParams& p, const FactorState& s,
                const MarketCurve& curve, double maturity);

/// E[Z(t,T)] with x(0) = y(0) = 0; equals the market zero rate at t = 0.
double expected_zc_rate(const G2ppParams& p, const MarketCurve& curve,
                        double t, double maturity);

/// Per-factor loadings of dZ/df on the Brownian shocks.
struct Loadings {
    double x;
    double y;
};
Loadings loading(const G2ppParams& p, double tenor, CurveKind kind);

/// Covariance / correlation of dG(Ti), dG(Tj) where G is the ZC or FWD curve.
double cov_dG(const G2ppParams& p, double ti, double tj, CurveKind kind);
double corr_dG(const G2ppParams& p, double ti, double tj, CurveKind kind);

/// Symmetric matrix of cov or corr over the tenor grid.
Eigen::MatrixXd cov_matrix(const G2ppParams& p,
                           const std::vector<double>& tenors, CurveKind kind,
                           Quantity quantity);

/// d(cov or corr)(Ti,Tj) / d(param), central finite difference with relative
/// step 1e-6; one-sided when the step would leave the valid domain.
double sensitivity(const G2ppParams& p, ParamId param, double ti, double tj,
                   CurveKind kind, Quantity quantity);

double get_param(const G2ppParams& p, ParamId id);
void set_param(G2ppParams& p, ParamId id, double value);
const char* param_name(ParamId id);

}  // namespace g2cal
