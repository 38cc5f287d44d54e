#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "g2cal/g2pp.hpp"

namespace g2cal {

/// Per-parameter sampling intervals.
struct ParamRanges {
    double lo[5];  // indexed by ParamId order: k_x, k_y, sigma_x, sigma_y, rho
    double hi[5];

    void validate() const;
    G2ppParams midpoint() const;
    double width(ParamId id) const { return hi[static_cast<int>(id)] - lo[static_cast<int>(id)]; }
};

/// Intervals [v(1-gamma), v(1+gamma)] for k and sigma; for rho the
/// symmetric interval [-|rho_ref|, +|rho_ref|]. Requires 0 < gamma < 1.
ParamRanges extend_reference(const G2ppParams& ref, double gamma);

/// n i.i.d. uniform draws per coordinate, deterministic given seed.
/// The stream is counter-based per row, so rows are order-independent.
std::vector<G2ppParams> sample_params(const ParamRanges& ranges, int n,
                                      std::uint64_t seed);

/// Lower-triangle column-stacked vectorization of a symmetric matrix:
/// for each column j left to right, rows i >= j (i > j when the diagonal
/// is excluded).
Eigen::VectorXd vectorize_lower(const Eigen::MatrixXd& m, bool include_diag);
Eigen::MatrixXd devectorize_lower(const Eigen::VectorXd& v, int dim,
                                  bool include_diag);

/// Indirect features: one vectorized cov/corr matrix per parameter row.
struct IndirectDataset {
    Eigen::MatrixXd features;  // N x nf
    Eigen::MatrixXd targets;   // N x 5
    CurveKind kind;
    Quantity quantity;
    std::vector<double> tenors;
};

IndirectDataset build_indirect(const std::vector<G2ppParams>& params,
                               const std::vector<double>& tenors,
                               CurveKind kind, Quantity quantity);

/// Direct features: expected-ZC grids, rows flattened (step-major).
struct DirectDataset {
    Eigen::MatrixXd grids;    // N x (n_steps * n_tenors), row-major grid
    Eigen::MatrixXd targets;  // N x 5
    std::vector<double> tenors;
    int n_steps;
    double dt;  // years between observation dates
};

/// Observation tenor grid {1D, 1W, 1M..9M, 1Y..12Y, 15Y..50Y} (27 tenors).
std::vector<double> default_direct_tenors();

DirectDataset build_direct(const std::vector<G2ppParams>& params,
                           const MarketCurve& curve,
                           const std::vector<double>& tenors, int n_steps,
                           double dt);

/// Per-column affine map to [0,1] fitted on training data.
class MinMaxScaler {
public:
    void fit(const Eigen::MatrixXd& data);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& data) const;
    Eigen::MatrixXd inverse(const Eigen::MatrixXd& data) const;
    bool fitted() const { return fitted_; }
    const Eigen::VectorXd& col_min() const { return min_; }
    const Eigen::VectorXd& col_max() const { return max_; }
    static MinMaxScaler from_bounds(Eigen::VectorXd min, Eigen::VectorXd max);

private:
    Eigen::VectorXd min_, max_;
    bool fitted_ = false;
};

/// Seeded uniform permutation split into train / validation row indices.
struct SplitIndices {
    std::vector<int> train;
    std::vector<int> validation;
};
SplitIndices split_indices(int n_rows, double train_fraction, std::uint64_t seed);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows);

/// Binary dataset container: text header then row-major FP64 features and
/// targets.
struct DatasetFile {
    std::string variant;  // cov-zc | cov-fwd | cor-zc | cor-fwd | direct
    std::vector<double> tenors;
    int n_steps = 0;   // direct only
    double dt = 0.0;   // direct only
    Eigen::MatrixXd features;
    Eigen::MatrixXd targets;
};

void save_dataset(const std::string& path, const DatasetFile& ds);
DatasetFile load_dataset(const std::string& path);
void export_csv(const std::string& path, const Eigen::MatrixXd& m,
                const std::vector<std::string>& header);

}  // namespace g2cal
