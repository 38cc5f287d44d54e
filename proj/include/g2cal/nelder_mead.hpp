#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <vector>

namespace g2cal {

struct NelderMeadOptions {
    int max_iter = 4000;
    double f_tol = 1e-14;   // spread of simplex values
    double x_tol = 1e-10;   // spread of simplex vertices
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Downhill simplex with the standard reflection/expansion/contraction
/// coefficients. Bounds, if any, are the objective's responsibility.
inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& initial_step,
    const NelderMeadOptions& opts = {}) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> simplex(static_cast<size_t>(n) + 1, x0);
    for (int i = 0; i < n; ++i) simplex[static_cast<size_t>(i) + 1](i) += initial_step(i);
    std::vector<double> fv(simplex.size());
    for (size_t i = 0; i < simplex.size(); ++i) fv[i] = f(simplex[i]);

    NelderMeadResult res;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        // order vertices by value
        std::vector<size_t> idx(simplex.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](size_t a, size_t b) { return fv[a] < fv[b]; });
        {
            std::vector<Eigen::VectorXd> s2;
            std::vector<double> f2;
            for (size_t i : idx) {
                s2.push_back(simplex[i]);
                f2.push_back(fv[i]);
            }
            simplex = std::move(s2);
            fv = std::move(f2);
        }

        double x_spread = 0.0;
        for (size_t i = 1; i < simplex.size(); ++i)
            x_spread = std::max(x_spread, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
        if (fv.back() - fv.front() < opts.f_tol && x_spread < opts.x_tol) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i];
        centroid /= n;

        const Eigen::VectorXd reflected = centroid + (centroid - simplex.back());
        const double fr = f(reflected);
        if (fr < fv.front()) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex.back());
            const double fe = f(expanded);
            if (fe < fr) {
                simplex.back() = expanded;
                fv.back() = fe;
            } else {
                simplex.back() = reflected;
                fv.back() = fr;
            }
        } else if (fr < fv[fv.size() - 2]) {
            simplex.back() = reflected;
            fv.back() = fr;
        } else {
            const Eigen::VectorXd contracted =
                centroid + 0.5 * (simplex.back() - centroid);
            const double fc = f(contracted);
            if (fc < fv.back()) {
                simplex.back() = contracted;
                fv.back() = fc;
            } else {
                for (size_t i = 1; i < simplex.size(); ++i) {
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
                    fv[i] = f(simplex[i]);
                }
            }
        }
    }
    res.x = simplex[0];
    res.fx = fv[0];
    res.iterations = iter;
    return res;
}

}  // namespace g2cal
