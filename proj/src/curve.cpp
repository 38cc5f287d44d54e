#include "g2cal/curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace g2cal {

MarketCurve::MarketCurve(std::vector<double> tenors,
                         std::vector<double> discount_factors)
    : tenors_(std::move(tenors)), dfs_(std::move(discount_factors)) {
    if (tenors_.empty() || tenors_.size() != dfs_.size())
        throw std::invalid_argument("curve: tenor/discount size mismatch");
    if (tenors_.front() <= 0.0)
        throw std::invalid_argument("curve: tenors must be positive");
    for (size_t i = 1; i < tenors_.size(); ++i)
        if (tenors_[i] <= tenors_[i - 1])
            throw std::invalid_argument("curve: tenors must be strictly increasing");
    log_dfs_.resize(dfs_.size());
    for (size_t i = 0; i < dfs_.size(); ++i) {
        if (dfs_[i] <= 0.0 || dfs_[i] > 1.0)
            throw std::invalid_argument("curve: discount factors must lie in (0, 1]");
        log_dfs_[i] = std::log(dfs_[i]);
    }
}

double MarketCurve::discount(double maturity) const {
    if (maturity < 0.0)
        throw std::domain_error("curve: negative maturity");
    if (maturity > tenors_.back())
        throw std::domain_error("curve: maturity beyond last pillar");
    if (maturity == 0.0) return 1.0;

    // First pillar at or above T; interpolate ln P from (0, 0) below it.
    auto it = std::lower_bound(tenors_.begin(), tenors_.end(), maturity);
    size_t hi = static_cast<size_t>(it - tenors_.begin());
    if (hi < tenors_.size() && tenors_[hi] == maturity) return dfs_[hi];

    double t0 = 0.0, l0 = 0.0;
    if (hi > 0) {
        t0 = tenors_[hi - 1];
        l0 = log_dfs_[hi - 1];
    }
    double w = (maturity - t0) / (tenors_[hi] - t0);
    return std::exp(l0 + w * (log_dfs_[hi] - l0));
}

double MarketCurve::zero_rate(double maturity) const {
    if (maturity <= 0.0)
        throw std::domain_error("curve: zero rate needs T > 0");
    return -std::log(discount(maturity)) / maturity;
}

double MarketCurve::instantaneous_forward(double maturity) const {
    if (maturity < 0.0 || maturity > tenors_.back())
        throw std::domain_error("curve: forward outside curve domain");
    // Interval containing T, half-open [t_i, t_{i+1}).
    auto it = std::upper_bound(tenors_.begin(), tenors_.end(), maturity);
    size_t hi = static_cast<size_t>(it - tenors_.begin());
    if (hi == tenors_.size()) hi = tenors_.size() - 1;  // last pillar
    double t0 = 0.0, l0 = 0.0;
    if (hi > 0) {
        t0 = tenors_[hi - 1];
        l0 = log_dfs_[hi - 1];
    }
    return -(log_dfs_[hi] - l0) / (tenors_[hi] - t0);
}

MarketCurve MarketCurve::from_zero_rates(const std::vector<double>& tenors,
                                         const std::vector<double>& rates) {
    if (tenors.size() != rates.size())
        throw std::invalid_argument("curve: tenor/rate size mismatch");
    std::vector<double> dfs(tenors.size());
    for (size_t i = 0; i < tenors.size(); ++i)
        dfs[i] = std::exp(-rates[i] * tenors[i]);
    return MarketCurve(tenors, dfs);
}

MarketCurve MarketCurve::flat(double rate, double max_tenor, int pillars) {
    std::vector<double> tenors(pillars), rates(pillars, rate);
    for (int i = 0; i < pillars; ++i)
        tenors[i] = max_tenor * (i + 1) / pillars;
    return from_zero_rates(tenors, rates);
}

MarketCurve MarketCurve::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("curve: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("curve: empty file " + path);
    std::vector<double> tenors, dfs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b))
            throw std::runtime_error("curve: malformed row: " + line);
        tenors.push_back(std::stod(a));
        dfs.push_back(std::stod(b));
    }
    return MarketCurve(tenors, dfs);
}

void MarketCurve::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("curve: cannot write " + path);
    out << "tenor_years,discount_factor\n";
    out.precision(17);
    for (size_t i = 0; i < tenors_.size(); ++i)
        out << tenors_[i] << ',' << dfs_[i] << '\n';
}

double nelson_siegel_rate(double beta0, double beta1, double beta2, double tau,
                          double maturity) {
    if (tau <= 0.0) throw std::domain_error("nelson_siegel: tau must be positive");
    if (maturity <= 0.0) return beta0 + beta1;
    double x = maturity / tau;
    double decay = (1.0 - std::exp(-x)) / x;
    return beta0 + beta1 * decay + beta2 * (decay - std::exp(-x));
}

MarketCurve nelson_siegel_curve(double beta0, double beta1, double beta2,
                                double tau, const std::vector<double>& tenors) {
    std::vector<double> rates(tenors.size());
    for (size_t i = 0; i < tenors.size(); ++i)
        rates[i] = nelson_siegel_rate(beta0, beta1, beta2, tau, tenors[i]);
    return MarketCurve::from_zero_rates(tenors, rates);
}

}  // namespace g2cal
