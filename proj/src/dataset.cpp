#include "g2cal/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace g2cal {

namespace {

// splitmix64; per-row keys make generation order-independent across rows.
std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double u01(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

}  // namespace

void ParamRanges::validate() const {
    for (int i = 0; i < 5; ++i)
        if (!(lo[i] < hi[i]))
            throw std::domain_error("param ranges: min must be < max");
    for (int i = 0; i < 4; ++i)
        if (lo[i] <= 0.0)
            throw std::domain_error("param ranges: k/sigma min must be positive");
    if (lo[4] < -1.0 || hi[4] > 1.0)
        throw std::domain_error("param ranges: rho bounds outside [-1, 1]");
}

G2ppParams ParamRanges::midpoint() const {
    return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2]),
            0.5 * (lo[3] + hi[3]), 0.5 * (lo[4] + hi[4])};
}

ParamRanges extend_reference(const G2ppParams& ref, double gamma) {
    ref.validate();
    if (gamma <= 0.0 || gamma >= 1.0)
        throw std::domain_error("extend_reference: gamma must lie in (0, 1)");
    const double v[4] = {ref.k_x, ref.k_y, ref.sigma_x, ref.sigma_y};
    ParamRanges r{};
    for (int i = 0; i < 4; ++i) {
        r.lo[i] = v[i] * (1.0 - gamma);
        r.hi[i] = v[i] * (1.0 + gamma);
    }
    r.lo[4] = -std::abs(ref.rho);
    r.hi[4] = std::abs(ref.rho);
    r.validate();
    return r;
}

std::vector<G2ppParams> sample_params(const ParamRanges& ranges, int n,
                                      std::uint64_t seed) {
    ranges.validate();
    if (n < 1) throw std::invalid_argument("sample_params: n must be >= 1");
    std::vector<G2ppParams> out(static_cast<size_t>(n));
    for (int row = 0; row < n; ++row) {
        std::uint64_t state = seed + 0x9E3779B97F4A7C15ULL *
            (static_cast<std::uint64_t>(row) + 1);
        double v[5];
        for (int i = 0; i < 5; ++i)
            v[i] = ranges.lo[i] + (ranges.hi[i] - ranges.lo[i]) * u01(state);
        out[static_cast<size_t>(row)] = {v[0], v[1], v[2], v[3], v[4]};
    }
    return out;
}

Eigen::VectorXd vectorize_lower(const Eigen::MatrixXd& m, bool include_diag) {
    const Eigen::Index n = m.rows();
    if (m.cols() != n) throw std::invalid_argument("vectorize: matrix not square");
    const Eigen::Index len = include_diag ? n * (n + 1) / 2 : n * (n - 1) / 2;
    Eigen::VectorXd v(len);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = include_diag ? j : j + 1; i < n; ++i)
            v(k++) = m(i, j);
    return v;
}

Eigen::MatrixXd devectorize_lower(const Eigen::VectorXd& v, int dim,
                                  bool include_diag) {
    const Eigen::Index n = dim;
    const Eigen::Index len = include_diag ? n * (n + 1) / 2 : n * (n - 1) / 2;
    if (v.size() != len) throw std::invalid_argument("devectorize: length mismatch");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    if (!include_diag) m.diagonal().setOnes();  // corr has unit diagonal
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = include_diag ? j : j + 1; i < n; ++i) {
            m(i, j) = m(j, i) = v(k++);
        }
    return m;
}

IndirectDataset build_indirect(const std::vector<G2ppParams>& params,
                               const std::vector<double>& tenors,
                               CurveKind kind, Quantity quantity) {
    const auto n = static_cast<Eigen::Index>(params.size());
    const auto m = static_cast<Eigen::Index>(tenors.size());
    const bool diag = quantity == Quantity::Cov;
    const Eigen::Index nf = diag ? m * (m + 1) / 2 : m * (m - 1) / 2;

    IndirectDataset ds;
    ds.features.resize(n, nf);
    ds.targets.resize(n, 5);
    ds.kind = kind;
    ds.quantity = quantity;
    ds.tenors = tenors;
    for (Eigen::Index r = 0; r < n; ++r) {
        const G2ppParams& p = params[static_cast<size_t>(r)];
        ds.features.row(r) =
            vectorize_lower(cov_matrix(p, tenors, kind, quantity), diag);
        ds.targets.row(r) << p.k_x, p.k_y, p.sigma_x, p.sigma_y, p.rho;
    }
    return ds;
}

std::vector<double> default_direct_tenors() {
    std::vector<double> t = {1.0 / 365.0, 7.0 / 365.0};
    for (double m : {1.0, 2.0, 3.0, 6.0, 9.0}) t.push_back(m / 12.0);
    for (int y = 1; y <= 12; ++y) t.push_back(y);
    for (int y = 15; y <= 50; y += 5) t.push_back(y);
    return t;
}

DirectDataset build_direct(const std::vector<G2ppParams>& params,
                           const MarketCurve& curve,
                           const std::vector<double>& tenors, int n_steps,
                           double dt) {
    if (n_steps < 1 || dt <= 0.0)
        throw std::invalid_argument("build_direct: bad grid configuration");
    const double horizon = (n_steps - 1) * dt + tenors.back();
    if (horizon > curve.max_tenor())
        throw std::domain_error("build_direct: curve does not cover t + max tenor");

    const auto n = static_cast<Eigen::Index>(params.size());
    const auto nt = static_cast<Eigen::Index>(tenors.size());
    DirectDataset ds;
    ds.grids.resize(n, static_cast<Eigen::Index>(n_steps) * nt);
    ds.targets.resize(n, 5);
    ds.tenors = tenors;
    ds.n_steps = n_steps;
    ds.dt = dt;
    for (Eigen::Index r = 0; r < n; ++r) {
        const G2ppParams& p = params[static_cast<size_t>(r)];
        for (int s = 0; s < n_steps; ++s) {
            const double t = s * dt;
            for (Eigen::Index k = 0; k < nt; ++k)
                ds.grids(r, s * nt + k) =
                    expected_zc_rate(p, curve, t, t + tenors[static_cast<size_t>(k)]);
        }
        ds.targets.row(r) << p.k_x, p.k_y, p.sigma_x, p.sigma_y, p.rho;
    }
    return ds;
}

void MinMaxScaler::fit(const Eigen::MatrixXd& data) {
    if (data.rows() < 2)
        throw std::invalid_argument("scaler: need at least two rows to fit");
    min_ = data.colwise().minCoeff();
    max_ = data.colwise().maxCoeff();
    for (Eigen::Index j = 0; j < min_.size(); ++j)
        if (max_(j) <= min_(j))
            throw std::runtime_error("scaler: constant column " + std::to_string(j));
    fitted_ = true;
}

MinMaxScaler MinMaxScaler::from_bounds(Eigen::VectorXd min, Eigen::VectorXd max) {
    MinMaxScaler s;
    s.min_ = std::move(min);
    s.max_ = std::move(max);
    s.fitted_ = true;
    return s;
}

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& data) const {
    if (!fitted_) throw std::logic_error("scaler: transform before fit");
    if (data.cols() != min_.size())
        throw std::invalid_argument("scaler: column count mismatch");
    return (data.rowwise() - min_.transpose()).array().rowwise() /
           (max_ - min_).transpose().array();
}

Eigen::MatrixXd MinMaxScaler::inverse(const Eigen::MatrixXd& data) const {
    if (!fitted_) throw std::logic_error("scaler: inverse before fit");
    if (data.cols() != min_.size())
        throw std::invalid_argument("scaler: column count mismatch");
    return (data.array().rowwise() * (max_ - min_).transpose().array()).matrix()
               .rowwise() + min_.transpose();
}

SplitIndices split_indices(int n_rows, double train_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw std::domain_error("split: train fraction must lie in (0, 1)");
    std::vector<int> perm(static_cast<size_t>(n_rows));
    std::iota(perm.begin(), perm.end(), 0);
    std::uint64_t state = seed ^ 0xD6E8FEB86659FD93ULL;
    for (int i = n_rows - 1; i > 0; --i) {
        const auto j = static_cast<int>(splitmix64(state) % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
    }
    const int n_train = static_cast<int>(std::lround(train_fraction * n_rows));
    SplitIndices s;
    s.train.assign(perm.begin(), perm.begin() + n_train);
    s.validation.assign(perm.begin() + n_train, perm.end());
    return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

namespace {
constexpr const char* kMagic = "G2CALDS1";

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            out.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
}

Eigen::MatrixXd read_matrix(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            double v;
            in.read(reinterpret_cast<char*>(&v), sizeof(double));
            m(r, c) = v;
        }
    if (!in) throw std::runtime_error("dataset: truncated file");
    return m;
}
}  // namespace

void save_dataset(const std::string& path, const DatasetFile& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dataset: cannot write " + path);
    out << kMagic << "\n";
    out << "version 1\n";
    out << "variant " << ds.variant << "\n";
    out << "rows " << ds.features.rows() << "\n";
    out << "features " << ds.features.cols() << "\n";
    out << "targets " << ds.targets.cols() << "\n";
    out << "vectorization lower-triangle-column-stacked\n";
    out << "tenors";
    out.precision(17);
    for (double t : ds.tenors) out << ' ' << t;
    out << "\n";
    out << "n_steps " << ds.n_steps << "\n";
    out << "dt " << ds.dt << "\n";
    out << "end_header\n";
    write_matrix(out, ds.features);
    write_matrix(out, ds.targets);
}

DatasetFile load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("dataset: cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != kMagic) throw std::runtime_error("dataset: bad magic in " + path);

    DatasetFile ds;
    Eigen::Index rows = 0, nf = 0, nt = 0;
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "variant") ss >> ds.variant;
        else if (key == "rows") ss >> rows;
        else if (key == "features") ss >> nf;
        else if (key == "targets") ss >> nt;
        else if (key == "n_steps") ss >> ds.n_steps;
        else if (key == "dt") ss >> ds.dt;
        else if (key == "tenors") {
            double t;
            while (ss >> t) ds.tenors.push_back(t);
        }
    }
    ds.features = read_matrix(in, rows, nf);
    ds.targets = read_matrix(in, rows, nt);
    return ds;
}

void export_csv(const std::string& path, const Eigen::MatrixXd& m,
                const std::vector<std::string>& header) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    out.precision(17);
    for (size_t i = 0; i < header.size(); ++i)
        out << header[i] << (i + 1 < header.size() ? ',' : '\n');
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            out << m(r, c) << (c + 1 < m.cols() ? ',' : '\n');
}

}  // namespace g2cal
