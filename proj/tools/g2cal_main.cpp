#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "g2cal/curve.hpp"
#include "g2cal/dataset.hpp"
#include "g2cal/g2pp.hpp"
#include "g2cal/pipeline.hpp"

namespace {

using namespace g2cal;

struct VariantInfo {
    bool direct;
    CurveKind kind;
    Quantity quantity;
};

VariantInfo parse_variant(const std::string& v) {
    if (v == "cov-zc") return {false, CurveKind::ZC, Quantity::Cov};
    if (v == "cov-fwd") return {false, CurveKind::FWD, Quantity::Cov};
    if (v == "cor-zc") return {false, CurveKind::ZC, Quantity::Corr};
    if (v == "cor-fwd") return {false, CurveKind::FWD, Quantity::Corr};
    if (v == "direct") return {true, CurveKind::ZC, Quantity::Cov};
    throw CLI::ValidationError("variant", "unknown variant: " + v);
}

std::vector<double> year_tenors(int from, int to) {
    std::vector<double> t;
    for (int y = from; y <= to; ++y) t.push_back(y);
    return t;
}

MarketCurve default_curve() {
    // Nelson-Siegel stand-in for an initial market curve, pillars out to 60y.
    std::vector<double> tenors = default_direct_tenors();
    tenors.push_back(55.0);
    tenors.push_back(60.0);
    return nelson_siegel_curve(0.015, -0.010, 0.01, 2.0, tenors);
}

MarketCurve resolve_curve(const std::string& path) {
    return path.empty() ? default_curve() : MarketCurve::load_csv(path);
}

void write_manifest(const std::string& path,
                    const std::map<std::string, std::string>& entries) {
    std::ofstream out(path);
    out << "# g2cal run manifest\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

// Flat key=value config file; '#' starts a comment. Flags override file
// values, so the file is applied as flag defaults before parsing.
void apply_config_file(CLI::App* cmd, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::ValidationError("config", "cannot open " + path);
    std::string line;
    while (std::getline(in, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr)
            throw CLI::ValidationError("config", "unknown key: " + key);
        if (opt->count() == 0) opt->add_result(value);
    }
}

std::string variant_of(const DatasetFile& ds) { return ds.variant; }

int run(int argc, char** argv) {
    CLI::App app{"G2++ calibration engine"};
    app.require_subcommand(1);

    std::string config_path;

    // --- gen-data ----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    std::string gen_variant = "cov-zc", gen_out = "dataset.bin", gen_curve;
    int gen_n = 10000, gen_steps = 106;
    std::uint64_t gen_seed = 42;
    double gen_gamma = 2.0 / 3.0, gen_dt = 7.0 / 365.0;
    gen->add_option("--config", config_path, "key=value config file");
    gen->add_option("--variant", gen_variant, "cov-zc|cov-fwd|cor-zc|cor-fwd|direct");
    gen->add_option("--n", gen_n, "number of parameter draws");
    gen->add_option("--seed", gen_seed, "sampling seed");
    gen->add_option("--gamma", gen_gamma, "range extension factor");
    gen->add_option("--out", gen_out, "output dataset file");
    gen->add_option("--curve", gen_curve, "curve CSV (direct variant)");
    gen->add_option("--steps", gen_steps, "observation steps (direct variant)");
    gen->add_option("--dt", gen_dt, "observation step in years (direct variant)");

    // --- train -------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Train a calibration network");
    std::string tr_data = "dataset.bin", tr_ckpt = "model.ckpt",
                tr_loss = "loss_history.csv";
    int tr_epochs = -1, tr_batch = 1000, tr_channels = 4;
    double tr_lr = -1.0, tr_fraction = 0.8, tr_dropout = 0.25;
    std::string tr_schedule = "constant";
    std::uint64_t tr_seed = 42;
    tr->add_option("--config", config_path, "key=value config file");
    tr->add_option("--data", tr_data, "dataset file from gen-data");
    tr->add_option("--epochs", tr_epochs, "epochs (default 1000 indirect, 4000 direct)");
    tr->add_option("--lr", tr_lr, "learning rate (default 0.001 indirect, 0.0002 direct)");
    tr->add_option("--batch", tr_batch, "mini-batch size");
    tr->add_option("--schedule", tr_schedule, "lr schedule: constant|cosine");
    tr->add_option("--dropout", tr_dropout, "dropout rate before the output head");
    tr->add_option("--channels", tr_channels, "conv output channels (direct)");
    tr->add_option("--train-fraction", tr_fraction, "train split fraction");
    tr->add_option("--seed", tr_seed, "training seed");
    tr->add_option("--out", tr_ckpt, "checkpoint output");
    tr->add_option("--loss-out", tr_loss, "loss history CSV");

    // --- evaluate ----------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on the validation split");
    std::string ev_data = "dataset.bin", ev_ckpt = "model.ckpt",
                ev_report = "report.csv", ev_fit = "fitting.csv";
    double ev_fraction = 0.8;
    std::uint64_t ev_seed = 42;
    ev->add_option("--config", config_path, "key=value config file");
    ev->add_option("--data", ev_data, "dataset file");
    ev->add_option("--model", ev_ckpt, "checkpoint");
    ev->add_option("--train-fraction", ev_fraction, "split fraction used in training");
    ev->add_option("--seed", ev_seed, "split seed used in training");
    ev->add_option("--report", ev_report, "report CSV");
    ev->add_option("--fitting", ev_fit, "fitting-curve CSV");

    // --- calibrate ---------------------------------------------------------
    auto* cal = app.add_subcommand("calibrate", "One-shot calibration from a feature CSV row");
    std::string cal_ckpt = "model.ckpt", cal_features;
    cal->add_option("--config", config_path, "key=value config file");
    cal->add_option("--model", cal_ckpt, "checkpoint");
    cal->add_option("--features", cal_features, "CSV with one feature row (no header)")
        ->required();

    // --- bench -------------------------------------------------------------
    auto* be = app.add_subcommand("bench", "Timing of batched NN inference vs classical baseline");
    std::string be_data = "dataset.bin", be_ckpt = "model.ckpt";
    int be_classical = 5;
    double be_fraction = 0.8;
    std::uint64_t be_seed = 42;
    be->add_option("--config", config_path, "key=value config file");
    be->add_option("--data", be_data, "dataset file");
    be->add_option("--model", be_ckpt, "checkpoint");
    be->add_option("--classical-runs", be_classical, "classical calibrations to time");
    be->add_option("--train-fraction", be_fraction, "split fraction");
    be->add_option("--seed", be_seed, "split seed");

    // --- sensitivity -------------------------------------------------------
    auto* se = app.add_subcommand("sensitivity", "Derivative sweeps of cov/corr at a tenor pair");
    std::string se_out = "sensitivity.csv", se_kind = "zc";
    int se_samples = 100;
    double se_ti = 5.0, se_tj = 7.0, se_gamma = 2.0 / 3.0;
    se->add_option("--config", config_path, "key=value config file");
    se->add_option("--out", se_out, "output CSV");
    se->add_option("--samples", se_samples, "sweep points per parameter");
    se->add_option("--ti", se_ti, "first tenor");
    se->add_option("--tj", se_tj, "second tenor");
    se->add_option("--kind", se_kind, "zc|fwd");
    se->add_option("--gamma", se_gamma, "range extension factor");

    // --- curve -------------------------------------------------------------
    auto* cu = app.add_subcommand("curve", "Build or validate a curve CSV");
    std::string cu_out, cu_validate;
    double cu_b0 = 0.015, cu_b1 = -0.010, cu_b2 = 0.01, cu_tau = 2.0;
    cu->add_option("--config", config_path, "key=value config file");
    cu->add_option("--out", cu_out, "write a Nelson-Siegel curve CSV here");
    cu->add_option("--validate", cu_validate, "check an existing curve CSV");
    cu->add_option("--beta0", cu_b0, "long-end level");
    cu->add_option("--beta1", cu_b1, "short-end tilt");
    cu->add_option("--beta2", cu_b2, "hump");
    cu->add_option("--tau", cu_tau, "hump location in years");

    // Pre-scan for the subcommand and --config so file values become that
    // subcommand's defaults before parsing.
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    if (!config_path.empty() && argc > 1)
        for (auto* cmd : {gen, tr, ev, cal, be, se, cu})
            if (cmd->get_name() == argv[1]) apply_config_file(cmd, config_path);

    CLI11_PARSE(app, argc, argv);

    const G2ppParams ref = reference_params();

    if (gen->parsed()) {
        const VariantInfo info = parse_variant(gen_variant);
        const ParamRanges ranges = extend_reference(ref, gen_gamma);
        const std::vector<G2ppParams> params = sample_params(ranges, gen_n, gen_seed);
        DatasetFile ds;
        ds.variant = gen_variant;
        if (info.direct) {
            const MarketCurve curve = resolve_curve(gen_curve);
            DirectDataset d = build_direct(params, curve, default_direct_tenors(),
                                           gen_steps, gen_dt);
            ds.tenors = d.tenors;
            ds.n_steps = d.n_steps;
            ds.dt = d.dt;
            ds.features = std::move(d.grids);
            ds.targets = std::move(d.targets);
        } else {
            IndirectDataset d = build_indirect(params, year_tenors(1, 12),
                                               info.kind, info.quantity);
            ds.tenors = d.tenors;
            ds.features = std::move(d.features);
            ds.targets = std::move(d.targets);
        }
        save_dataset(gen_out, ds);
        write_manifest(gen_out + ".manifest",
                       {{"command", "gen-data"},
                        {"variant", gen_variant},
                        {"n", std::to_string(gen_n)},
                        {"seed", std::to_string(gen_seed)},
                        {"gamma", std::to_string(gen_gamma)},
                        {"curve", gen_curve.empty() ? "nelson-siegel-default" : gen_curve},
                        {"out", gen_out},
                        {"format_version", "1"}});
        std::cout << "wrote " << gen_out << " (" << ds.features.rows() << " rows, nf="
                  << ds.features.cols() << ")\n";
        return 0;
    }

    if (tr->parsed()) {
        const DatasetFile ds = load_dataset(tr_data);
        const VariantInfo info = parse_variant(variant_of(ds));
        TrainConfig cfg;
        cfg.kind = info.direct ? PipelineKind::Direct : PipelineKind::Indirect;
        cfg.batch_size = tr_batch;
        cfg.epochs = tr_epochs > 0 ? tr_epochs : (info.direct ? 4000 : 1000);
        cfg.lr = tr_lr > 0 ? tr_lr : (info.direct ? 0.0002 : 0.001);
        if (tr_schedule == "cosine") cfg.schedule = LrSchedule::Cosine;
        else if (tr_schedule != "constant")
            throw CLI::ValidationError("schedule", "unknown schedule: " + tr_schedule);
        cfg.dropout_p = tr_dropout;
        cfg.seed = tr_seed;
        cfg.conv_channels = tr_channels;
        cfg.grid_h = ds.n_steps;
        cfg.grid_w = static_cast<int>(ds.tenors.size());

        const SplitIndices split = split_indices(static_cast<int>(ds.features.rows()),
                                                 tr_fraction, tr_seed);
        const Eigen::MatrixXd x_train = take_rows(ds.features, split.train);
        const Eigen::MatrixXd y_train = take_rows(ds.targets, split.train);

        MinMaxScaler target_scaler;
        target_scaler.fit(y_train);
        std::optional<MinMaxScaler> feature_scaler;
        Eigen::MatrixXd x_scaled = x_train;
        if (!info.direct) {
            MinMaxScaler fs;
            fs.fit(x_train);
            x_scaled = fs.transform(x_train);
            feature_scaler = std::move(fs);
        }
        TrainResult result = train(cfg, x_scaled, target_scaler.transform(y_train));

        Checkpoint ckpt;
        ckpt.kind = cfg.kind;
        ckpt.variant = ds.variant;
        ckpt.model = std::move(result.model);
        ckpt.feature_scaler = feature_scaler;
        ckpt.target_scaler = target_scaler;
        ckpt.grid_h = cfg.grid_h;
        ckpt.grid_w = cfg.grid_w;
        save_checkpoint(tr_ckpt, ckpt);

        std::ofstream loss(tr_loss);
        loss << "epoch,train_loss\n";
        loss.precision(12);
        for (size_t e = 0; e < result.loss_history.size(); ++e)
            loss << e << ',' << result.loss_history[e] << '\n';

        write_manifest(tr_ckpt + ".manifest",
                       {{"command", "train"},
                        {"data", tr_data},
                        {"variant", ds.variant},
                        {"epochs", std::to_string(cfg.epochs)},
                        {"lr", std::to_string(cfg.lr)},
                        {"batch", std::to_string(cfg.batch_size)},
                        {"channels", std::to_string(cfg.conv_channels)},
                        {"train_fraction", std::to_string(tr_fraction)},
                        {"seed", std::to_string(tr_seed)},
                        {"out", tr_ckpt}});
        std::cout << "trained " << ds.variant << ": final loss "
                  << result.loss_history.back() << ", checkpoint " << tr_ckpt << "\n";
        return 0;
    }

    if (ev->parsed()) {
        const DatasetFile ds = load_dataset(ev_data);
        Checkpoint ckpt = load_checkpoint(ev_ckpt);
        if (ckpt.variant != ds.variant)
            throw std::runtime_error("evaluate: checkpoint variant " + ckpt.variant +
                                     " does not match dataset " + ds.variant);
        const SplitIndices split = split_indices(static_cast<int>(ds.features.rows()),
                                                 ev_fraction, ev_seed);
        const Eigen::MatrixXd x_val = take_rows(ds.features, split.validation);
        const Eigen::MatrixXd y_val = take_rows(ds.targets, split.validation);
        CalibrationReport rep = evaluate(
            ckpt.model, ckpt.kind, x_val, y_val,
            ckpt.feature_scaler ? &*ckpt.feature_scaler : nullptr,
            ckpt.target_scaler, ckpt.grid_h, ckpt.grid_w);
        write_report_csv(ev_report, rep);
        write_fitting_csv(ev_fit, rep);
        std::cout << "validation rows: " << y_val.rows() << "\n";
        const char* names[5] = {"k_x", "k_y", "sigma_x", "sigma_y", "rho"};
        for (int i = 0; i < 5; ++i)
            std::cout << names[i] << " mse_raw " << rep.mse_raw(i) << "\n";
        std::cout << "inference_seconds " << rep.inference_seconds << "\n";
        return 0;
    }

    if (cal->parsed()) {
        Checkpoint ckpt = load_checkpoint(cal_ckpt);
        std::ifstream in(cal_features);
        if (!in) throw std::runtime_error("calibrate: cannot open " + cal_features);
        std::vector<double> row;
        std::string cell;
        while (std::getline(in, cell, ',')) {
            const auto pos = cell.find_first_not_of(" \t\r\n");
            if (pos == std::string::npos) continue;
            row.push_back(std::stod(cell.substr(pos)));
        }
        Eigen::MatrixXd x(1, static_cast<Eigen::Index>(row.size()));
        for (size_t i = 0; i < row.size(); ++i)
            x(0, static_cast<Eigen::Index>(i)) = row[i];
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 5);
        CalibrationReport rep = evaluate(
            ckpt.model, ckpt.kind, x, y,
            ckpt.feature_scaler ? &*ckpt.feature_scaler : nullptr,
            ckpt.target_scaler, ckpt.grid_h, ckpt.grid_w);
        const char* names[5] = {"k_x", "k_y", "sigma_x", "sigma_y", "rho"};
        std::cout.precision(10);
        for (int i = 0; i < 5; ++i)
            std::cout << names[i] << " " << rep.predicted_raw(0, i) << "\n";
        return 0;
    }

    if (be->parsed()) {
        const DatasetFile ds = load_dataset(be_data);
        Checkpoint ckpt = load_checkpoint(be_ckpt);
        const SplitIndices split = split_indices(static_cast<int>(ds.features.rows()),
                                                 be_fraction, be_seed);
        const Eigen::MatrixXd x_val = take_rows(ds.features, split.validation);
        const Eigen::MatrixXd y_val = take_rows(ds.targets, split.validation);
        CalibrationReport rep = evaluate(
            ckpt.model, ckpt.kind, x_val, y_val,
            ckpt.feature_scaler ? &*ckpt.feature_scaler : nullptr,
            ckpt.target_scaler, ckpt.grid_h, ckpt.grid_w);
        const double nn_per_instance = rep.inference_seconds / x_val.rows();

        const ParamRanges ranges = extend_reference(ref, 2.0 / 3.0);
        const std::vector<double> tenors = year_tenors(1, 12);
        const std::vector<G2ppParams> truths = sample_params(ranges, be_classical, 7);
        const auto t0 = std::chrono::steady_clock::now();
        for (const G2ppParams& p : truths) {
            const Eigen::MatrixXd target = cov_matrix(p, tenors, CurveKind::ZC, Quantity::Cov);
            classical_calibrate(target, tenors, CurveKind::ZC, Quantity::Cov,
                                ranges.midpoint(), ranges);
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double classical_per_instance =
            std::chrono::duration<double>(t1 - t0).count() / be_classical;

        std::cout << "metric,value\n";
        std::cout << "nn_batch_rows," << x_val.rows() << "\n";
        std::cout << "nn_batch_seconds," << rep.inference_seconds << "\n";
        std::cout << "nn_per_instance_seconds," << nn_per_instance << "\n";
        std::cout << "classical_per_instance_seconds," << classical_per_instance << "\n";
        std::cout << "classical_over_nn," << classical_per_instance / nn_per_instance << "\n";
        return 0;
    }

    if (se->parsed()) {
        const ParamRanges ranges = extend_reference(ref, se_gamma);
        const CurveKind kind = se_kind == "fwd" ? CurveKind::FWD : CurveKind::ZC;
        auto tables = sensitivity_report(ranges, se_samples, se_ti, se_tj, kind, ref);
        write_sensitivity_csv(se_out, tables);
        std::cout << "wrote " << se_out << "\n";
        return 0;
    }

    if (cu->parsed()) {
        if (!cu_validate.empty()) {
            const MarketCurve c = MarketCurve::load_csv(cu_validate);
            std::cout << cu_validate << ": " << c.tenors().size()
                      << " pillars, max tenor " << c.max_tenor() << "y, 1y zero rate "
                      << c.zero_rate(std::min(1.0, c.max_tenor())) << "\n";
            return 0;
        }
        if (cu_out.empty())
            throw CLI::ValidationError("curve", "need --out or --validate");
        std::vector<double> tenors = default_direct_tenors();
        tenors.push_back(55.0);
        tenors.push_back(60.0);
        nelson_siegel_curve(cu_b0, cu_b1, cu_b2, cu_tau, tenors).save_csv(cu_out);
        std::cout << "wrote " << cu_out << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
