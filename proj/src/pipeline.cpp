#include "g2cal/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "g2cal/nelder_mead.hpp"

namespace g2cal {

nn::Model build_fcn(int nf, std::uint64_t seed, double dropout_p) {
    if (nf < 1) throw std::invalid_argument("build_fcn: nf must be >= 1");
    nn::Model m(seed);
    m.dense(nf, 1000).relu()
        .dense(1000, 1500).relu()
        .dense(1500, 1000).relu()
        .dropout(dropout_p)
        .dense(1000, 5);
    return m;
}

nn::Model build_cnn(int height, int width, int channels, std::uint64_t seed,
                    double dropout_p) {
    const int kernel = 7, stride = 2, pad = 3;
    const int ch = (height + 2 * pad - kernel) / stride + 1;
    const int cw = (width + 2 * pad - kernel) / stride + 1;
    const int ph = (ch - kernel) / stride + 1;
    const int pw = (cw - kernel) / stride + 1;
    if (ph < 1 || pw < 1)
        throw std::invalid_argument("build_cnn: spatial dims collapse below 1");
    nn::Model m(seed);
    m.conv2d(1, channels, kernel, stride, pad).relu()
        .maxpool(kernel, stride)
        .flatten()
        .dense(channels * ph * pw, 100).relu()
        .dropout(dropout_p)
        .dense(100, 5);
    return m;
}

namespace {

nn::Tensor rows_to_tensor(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                          PipelineKind kind, int grid_h, int grid_w) {
    const int batch = static_cast<int>(rows.size());
    const int cols = static_cast<int>(m.cols());
    nn::Tensor t(kind == PipelineKind::Direct
                     ? std::vector<int>{batch, 1, grid_h, grid_w}
                     : std::vector<int>{batch, cols});
    for (int r = 0; r < batch; ++r)
        for (int c = 0; c < cols; ++c)
            t.data[static_cast<size_t>(r) * cols + c] = m(rows[static_cast<size_t>(r)], c);
    return t;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Eigen::MatrixXd& features,
                  const Eigen::MatrixXd& targets) {
    if (features.rows() != targets.rows())
        throw std::invalid_argument("train: feature/target row mismatch");
    if (config.kind == PipelineKind::Direct &&
        features.cols() != static_cast<Eigen::Index>(config.grid_h) * config.grid_w)
        throw std::invalid_argument("train: grid dims inconsistent with features");

    nn::Model model = config.kind == PipelineKind::Indirect
        ? build_fcn(static_cast<int>(features.cols()), config.seed, config.dropout_p)
        : build_cnn(config.grid_h, config.grid_w, config.conv_channels,
                    config.seed, config.dropout_p);
    nn::Adam adam(model, config.lr);

    const int n = static_cast<int>(features.rows());
    const int cols = static_cast<int>(targets.cols());
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    nn::Rng shuffle_rng(config.seed ^ 0x51A9B2C417D03E85ULL);

    TrainResult result{std::move(model), {}};
    result.loss_history.reserve(static_cast<size_t>(config.epochs));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.schedule == LrSchedule::Cosine)
            adam.set_lr(config.lr * 0.5 *
                        (1.0 + std::cos(M_PI * epoch / config.epochs)));
        for (int i = n - 1; i > 0; --i) {
            const auto j = static_cast<int>(shuffle_rng.next() %
                                            static_cast<std::uint64_t>(i + 1));
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
        double epoch_loss = 0.0;
        int n_batches = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int end = std::min(start + config.batch_size, n);
            std::vector<int> rows(order.begin() + start, order.begin() + end);
            nn::Tensor x = rows_to_tensor(features, rows, config.kind,
                                          config.grid_h, config.grid_w);
            nn::Tensor y({static_cast<int>(rows.size()), cols});
            for (size_t r = 0; r < rows.size(); ++r)
                for (int c = 0; c < cols; ++c)
                    y.data[r * static_cast<size_t>(cols) + static_cast<size_t>(c)] =
                        targets(rows[r], c);

            nn::Tensor pred = result.model.forward(x, true);
            nn::MseResult loss = nn::mse(pred, y);
            if (!std::isfinite(loss.loss))
                throw std::runtime_error(
                    "train: non-finite loss at epoch " + std::to_string(epoch) +
                    " batch " + std::to_string(n_batches));
            result.model.backward(loss.grad);
            adam.step(result.model);
            epoch_loss += loss.loss;
            ++n_batches;
        }
        result.loss_history.push_back(epoch_loss / n_batches);
    }
    return result;
}

CalibrationReport evaluate(nn::Model& model, PipelineKind kind,
                           const Eigen::MatrixXd& features_raw,
                           const Eigen::MatrixXd& targets_raw,
                           const MinMaxScaler* feature_scaler,
                           const MinMaxScaler& target_scaler, int grid_h,
                           int grid_w, int eval_batch) {
    if (kind == PipelineKind::Indirect && feature_scaler == nullptr)
        throw std::invalid_argument("evaluate: indirect pipeline needs a feature scaler");
    const Eigen::MatrixXd features = feature_scaler != nullptr
        ? feature_scaler->transform(features_raw) : features_raw;
    const int n = static_cast<int>(features.rows());

    Eigen::MatrixXd pred_scaled(n, 5);
    const auto t0 = std::chrono::steady_clock::now();
    for (int start = 0; start < n; start += eval_batch) {
        const int end = std::min(start + eval_batch, n);
        std::vector<int> rows(static_cast<size_t>(end - start));
        std::iota(rows.begin(), rows.end(), start);
        nn::Tensor x = rows_to_tensor(features, rows, kind, grid_h, grid_w);
        nn::Tensor out = model.forward(x, false);
        for (int r = start; r < end; ++r)
            for (int c = 0; c < 5; ++c)
                pred_scaled(r, c) =
                    out.data[static_cast<size_t>(r - start) * 5 + static_cast<size_t>(c)];
    }
    const auto t1 = std::chrono::steady_clock::now();

    CalibrationReport rep;
    rep.inference_seconds = std::chrono::duration<double>(t1 - t0).count();
    rep.predicted_raw = target_scaler.inverse(pred_scaled);
    rep.true_raw = targets_raw;
    const Eigen::MatrixXd true_scaled = target_scaler.transform(targets_raw);
    rep.mse_raw = (rep.predicted_raw - targets_raw).array().square()
                      .colwise().mean().transpose();
    rep.mse_scaled = (pred_scaled - true_scaled).array().square()
                         .colwise().mean().transpose();
    return rep;
}

namespace {
const char* kParamNames[5] = {"k_x", "k_y", "sigma_x", "sigma_y", "rho"};
}

void write_report_csv(const std::string& path, const CalibrationReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out.precision(10);
    out << "parameter,mse_raw,mse_scaled\n";
    for (int i = 0; i < 5; ++i)
        out << kParamNames[i] << ',' << report.mse_raw(i) << ','
            << report.mse_scaled(i) << '\n';
    out << "inference_seconds," << report.inference_seconds << ",\n";
}

void write_fitting_csv(const std::string& path, const CalibrationReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out.precision(10);
    out << "index";
    for (const char* n : kParamNames) out << ",true_" << n << ",pred_" << n;
    out << '\n';
    for (Eigen::Index r = 0; r < report.true_raw.rows(); ++r) {
        out << r;
        for (int c = 0; c < 5; ++c)
            out << ',' << report.true_raw(r, c) << ',' << report.predicted_raw(r, c);
        out << '\n';
    }
}

ClassicalResult classical_calibrate(const Eigen::MatrixXd& target,
                                    const std::vector<double>& tenors,
                                    CurveKind kind, Quantity quantity,
                                    const G2ppParams& init,
                                    const ParamRanges& bounds,
                                    int max_iter) {
    if (target.rows() != target.cols() ||
        target.rows() != static_cast<Eigen::Index>(tenors.size()))
        throw std::invalid_argument("classical: target/tenor size mismatch");
    bounds.validate();

    auto clamp = [&](const Eigen::VectorXd& x) {
        G2ppParams p;
        double v[5];
        for (int i = 0; i < 5; ++i)
            v[i] = std::clamp(x(i), bounds.lo[i], bounds.hi[i]);
        p = {v[0], v[1], v[2], v[3], v[4]};
        return p;
    };
    auto objective = [&](const Eigen::VectorXd& x) {
        const G2ppParams p = clamp(x);
        return (cov_matrix(p, tenors, kind, quantity) - target).squaredNorm();
    };

    Eigen::VectorXd x0(5);
    x0 << init.k_x, init.k_y, init.sigma_x, init.sigma_y, init.rho;
    Eigen::VectorXd step(5);
    for (int i = 0; i < 5; ++i) step(i) = 0.1 * (bounds.hi[i] - bounds.lo[i]);

    // A few deterministic restarts from the incumbent guard against the
    // simplex collapsing on a shoulder of the SSD surface.
    NelderMeadOptions opts;
    opts.max_iter = max_iter;
    NelderMeadResult best = nelder_mead(objective, x0, step, opts);
    int total_iters = best.iterations;
    for (int restart = 0; restart < 3; ++restart) {
        NelderMeadResult r = nelder_mead(objective, best.x, step * std::pow(0.3, restart + 1), opts);
        total_iters += r.iterations;
        if (r.fx < best.fx) best = r;
    }

    ClassicalResult res;
    res.params = clamp(best.x);
    res.ssd = best.fx;
    res.iterations = total_iters;
    res.converged = best.converged || best.fx < 1e-16;
    return res;
}

std::vector<SensitivityTable> sensitivity_report(const ParamRanges& ranges,
                                                 int n_samples, double ti,
                                                 double tj, CurveKind kind,
                                                 const G2ppParams& reference) {
    ranges.validate();
    std::vector<SensitivityTable> tables;
    for (ParamId id : {ParamId::KX, ParamId::SigmaY, ParamId::Rho}) {
        SensitivityTable t;
        t.param = id;
        const int i = static_cast<int>(id);
        for (int s = 0; s < n_samples; ++s) {
            // sweep strictly inside the range so FD steps stay valid
            const double frac = (s + 0.5) / n_samples;
            const double v = ranges.lo[i] + frac * (ranges.hi[i] - ranges.lo[i]);
            G2ppParams p = reference;
            set_param(p, id, v);
            t.values.push_back(v);
            t.cov_deriv.push_back(sensitivity(p, id, ti, tj, kind, Quantity::Cov));
            t.corr_deriv.push_back(sensitivity(p, id, ti, tj, kind, Quantity::Corr));
        }
        tables.push_back(std::move(t));
    }
    return tables;
}

void write_sensitivity_csv(const std::string& path,
                           const std::vector<SensitivityTable>& tables) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("sensitivity: cannot write " + path);
    out.precision(10);
    out << "parameter,value,dcov,dcorr\n";
    for (const SensitivityTable& t : tables)
        for (size_t i = 0; i < t.values.size(); ++i)
            out << param_name(t.param) << ',' << t.values[i] << ','
                << t.cov_deriv[i] << ',' << t.corr_deriv[i] << '\n';
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr const char* kCkptMagic = "G2CALCKPT1";

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double d = v(i);
        out.write(reinterpret_cast<const char*>(&d), sizeof(double));
    }
}

Eigen::VectorXd read_vector(std::ifstream& in, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double d;
        in.read(reinterpret_cast<char*>(&d), sizeof(double));
        v(i) = d;
    }
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out << kCkptMagic << "\n";
    out << "pipeline " << (ckpt.kind == PipelineKind::Indirect ? "indirect" : "direct") << "\n";
    out << "variant " << ckpt.variant << "\n";
    out << "grid " << ckpt.grid_h << ' ' << ckpt.grid_w << "\n";
    auto desc = ckpt.model.descriptors();
    out << "layers " << desc.size() << "\n";
    for (const std::string& d : desc) out << d << "\n";
    out << "feature_scaler " << (ckpt.feature_scaler ? ckpt.feature_scaler->col_min().size() : 0) << "\n";
    out << "target_scaler " << ckpt.target_scaler.col_min().size() << "\n";
    out << "end_header\n";
    if (ckpt.feature_scaler) {
        write_vector(out, ckpt.feature_scaler->col_min());
        write_vector(out, ckpt.feature_scaler->col_max());
    }
    write_vector(out, ckpt.target_scaler.col_min());
    write_vector(out, ckpt.target_scaler.col_max());
    for (const nn::ParamBlock& b : ckpt.model.params())
        out.write(reinterpret_cast<const char*>(b.value->ptr()),
                  static_cast<std::streamsize>(b.value->size() * sizeof(double)));
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != kCkptMagic) throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ckpt;
    std::vector<std::string> layer_lines;
    Eigen::Index n_feature_scaler = 0, n_target_scaler = 0;
    size_t n_layers = 0;
    while (std::getline(in, line) && line != "end_header") {
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "pipeline") {
            std::string v;
            ss >> v;
            ckpt.kind = v == "direct" ? PipelineKind::Direct : PipelineKind::Indirect;
        } else if (key == "variant") {
            ss >> ckpt.variant;
        } else if (key == "grid") {
            ss >> ckpt.grid_h >> ckpt.grid_w;
        } else if (key == "layers") {
            ss >> n_layers;
            for (size_t i = 0; i < n_layers; ++i) {
                std::getline(in, line);
                layer_lines.push_back(line);
            }
        } else if (key == "feature_scaler") {
            ss >> n_feature_scaler;
        } else if (key == "target_scaler") {
            ss >> n_target_scaler;
        }
    }
    ckpt.model = nn::Model::from_descriptors(layer_lines, 0);
    if (n_feature_scaler > 0) {
        Eigen::VectorXd lo = read_vector(in, n_feature_scaler);
        Eigen::VectorXd hi = read_vector(in, n_feature_scaler);
        ckpt.feature_scaler = MinMaxScaler::from_bounds(std::move(lo), std::move(hi));
    }
    {
        Eigen::VectorXd lo = read_vector(in, n_target_scaler);
        Eigen::VectorXd hi = read_vector(in, n_target_scaler);
        ckpt.target_scaler = MinMaxScaler::from_bounds(std::move(lo), std::move(hi));
    }
    for (nn::ParamBlock b : ckpt.model.params()) {
        in.read(reinterpret_cast<char*>(b.value->ptr()),
                static_cast<std::streamsize>(b.value->size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated parameter block");
    }
    return ckpt;
}

Eigen::VectorXd skill_floor(const ParamRanges& ranges) {
    Eigen::VectorXd v(5);
    for (int i = 0; i < 5; ++i) {
        const double w = ranges.hi[i] - ranges.lo[i];
        v(i) = w * w / 12.0;
    }
    return v;
}

}  // namespace g2cal
