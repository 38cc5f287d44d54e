#pragma once

#include <string>
#include <vector>

namespace g2cal {

/// Initial market discount curve P(0,T) with log-linear interpolation in
/// ln P between pillars (piecewise-constant continuously compounded
/// forwards). Immutable after construction.
class MarketCurve {
public:
    /// Pillars must be strictly increasing and positive; discount factors
    /// in (0, 1]. P(0,0) = 1 is implied.
    MarketCurve(std::vector<double> tenors, std::vector<double> discount_factors);

    /// P(0,T). Exact at pillars, 1 at T = 0. Throws outside [0, max tenor].
    double discount(double maturity) const;

    /// Continuously compounded zero rate -ln P(0,T) / T. Requires T > 0.
    double zero_rate(double maturity) const;

    /// Instantaneous forward -d/dT ln P(0,T). Piecewise constant between
    /// pillars; at a pillar returns the right-hand interval's forward
    /// (left-hand at the last pillar).
    double instantaneous_forward(double maturity) const;

    double max_tenor() const { return tenors_.back(); }
    const std::vector<double>& tenors() const { return tenors_; }
    const std::vector<double>& discount_factors() const { return dfs_; }

    /// Build from continuously compounded zero rates at the given tenors.
    static MarketCurve from_zero_rates(const std::vector<double>& tenors,
                                       const std::vector<double>& rates);

    /// Flat curve P(0,T) = exp(-rate * T) out to max_tenor.
    static MarketCurve flat(double rate, double max_tenor = 60.0,
                            int pillars = 61);

    /// CSV with header `tenor_years,discount_factor`.
    static MarketCurve load_csv(const std::string& path);
    void save_csv(const std::string& path) const;

private:
    std::vector<double> tenors_;
    std::vector<double> dfs_;
    std::vector<double> log_dfs_;
};

/// Synthetic default curve from the Nelson-Siegel zero-rate form
///   r(T) = b0 + b1 (1-e^{-T/tau})/(T/tau) + b2 [(1-e^{-T/tau})/(T/tau) - e^{-T/tau}]
/// Used when no CSV curve is supplied.
MarketCurve nelson_siegel_curve(double beta0, double beta1, double beta2,
                                double tau, const std::vector<double>& tenors);

/// Scalar Nelson-Siegel zero rate (the T -> 0 limit is b0 + b1).
double nelson_siegel_rate(double beta0, double beta1, double beta2, double tau,
                          double maturity);

}  // namespace g2cal
