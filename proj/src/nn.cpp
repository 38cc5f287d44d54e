#include "g2cal/nn.hpp"

#include <cblas.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace g2cal::nn {

namespace {

std::int64_t shape_size(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
        if (d < 1) throw std::invalid_argument("tensor: dims must be >= 1");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

void require_shape(const Tensor& t, const std::vector<int>& expect,
                   const char* where) {
    if (t.shape != expect)
        throw std::invalid_argument(std::string(where) + ": shape mismatch, got " +
                                    shape_str(t.shape) + " expected " +
                                    shape_str(expect));
}

// C(M,N) = alpha * op(A) op(B) + beta * C, row-major.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

int conv_out(int n, int pad, int k, int stride) {
    return (n + 2 * pad - k) / stride + 1;
}

double init_bound(int fan_in, int fan_out) {
    return std::sqrt(6.0 / (fan_in + fan_out));
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(shape_size(shape)), 0.0);
}

std::uint64_t Rng::next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

// ---------------------------------------------------------------------------
// Dense

DenseLayer::DenseLayer(int in, int out, Rng& rng)
    : weights({out, in}), bias({out}), w_grad_({out, in}), b_grad_({out}),
      in_(in), out_(out) {
    const double b = init_bound(in, out);
    for (double& w : weights.data) w = rng.uniform(-b, b);
}

Tensor DenseLayer::forward(const Tensor& x, bool) {
    if (x.shape.size() != 2 || x.dim(1) != in_)
        throw std::invalid_argument("dense: input " + shape_str(x.shape) +
                                    " incompatible with in=" + std::to_string(in_));
    input_ = x;
    const int batch = x.dim(0);
    Tensor y({batch, out_});
    // Y = X W^T + b
    gemm(false, true, batch, out_, in_, 1.0, x.ptr(), in_, weights.ptr(), in_,
         0.0, y.ptr(), out_);
    for (int r = 0; r < batch; ++r)
        for (int c = 0; c < out_; ++c)
            y.data[static_cast<size_t>(r) * out_ + c] += bias.data[static_cast<size_t>(c)];
    return y;
}

Tensor DenseLayer::backward(const Tensor& grad_out) {
    const int batch = input_.dim(0);
    require_shape(grad_out, {batch, out_}, "dense backward");
    // dW = dY^T X, db = colsum dY, dX = dY W
    gemm(true, false, out_, in_, batch, 1.0, grad_out.ptr(), out_, input_.ptr(),
         in_, 0.0, w_grad_.ptr(), in_);
    std::fill(b_grad_.data.begin(), b_grad_.data.end(), 0.0);
    for (int r = 0; r < batch; ++r)
        for (int c = 0; c < out_; ++c)
            b_grad_.data[static_cast<size_t>(c)] +=
                grad_out.data[static_cast<size_t>(r) * out_ + c];
    Tensor dx({batch, in_});
    gemm(false, false, batch, in_, out_, 1.0, grad_out.ptr(), out_,
         weights.ptr(), in_, 0.0, dx.ptr(), in_);
    return dx;
}

std::vector<ParamBlock> DenseLayer::params() {
    return {{"dense.weights", &weights, &w_grad_},
            {"dense.bias", &bias, &b_grad_}};
}

std::string DenseLayer::descriptor() const {
    return "dense " + std::to_string(in_) + " " + std::to_string(out_);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2dLayer::Conv2dLayer(int in_channels, int out_channels, int kernel,
                         int stride, int padding, Rng& rng)
    : filters({out_channels, in_channels, kernel, kernel}),
      bias({out_channels}),
      f_grad_({out_channels, in_channels, kernel, kernel}),
      b_grad_({out_channels}), in_c_(in_channels), out_c_(out_channels),
      k_(kernel), stride_(stride), pad_(padding) {
    if (stride < 1) throw std::invalid_argument("conv: stride must be >= 1");
    const double b = init_bound(in_channels * kernel * kernel,
                                out_channels * kernel * kernel);
    for (double& w : filters.data) w = rng.uniform(-b, b);
}

namespace {
// col has shape (in_c*k*k) x (oh*ow), column index = spatial output position.
void im2col(const double* x, int c_in, int h, int w, int k, int stride, int pad,
            int oh, int ow, double* col) {
    for (int c = 0; c < c_in; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                double* row = col + (static_cast<std::int64_t>(c) * k * k + ki * k + kj) *
                                        (static_cast<std::int64_t>(oh) * ow);
                for (int oi = 0; oi < oh; ++oi) {
                    const int ii = oi * stride - pad + ki;
                    for (int oj = 0; oj < ow; ++oj) {
                        const int jj = oj * stride - pad + kj;
                        row[static_cast<std::int64_t>(oi) * ow + oj] =
                            (ii >= 0 && ii < h && jj >= 0 && jj < w)
                                ? x[(static_cast<std::int64_t>(c) * h + ii) * w + jj]
                                : 0.0;
                    }
                }
            }
}

void col2im_add(const double* col, int c_in, int h, int w, int k, int stride,
                int pad, int oh, int ow, double* x) {
    for (int c = 0; c < c_in; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                const double* row = col + (static_cast<std::int64_t>(c) * k * k + ki * k + kj) *
                                              (static_cast<std::int64_t>(oh) * ow);
                for (int oi = 0; oi < oh; ++oi) {
                    const int ii = oi * stride - pad + ki;
                    if (ii < 0 || ii >= h) continue;
                    for (int oj = 0; oj < ow; ++oj) {
                        const int jj = oj * stride - pad + kj;
                        if (jj < 0 || jj >= w) continue;
                        x[(static_cast<std::int64_t>(c) * h + ii) * w + jj] +=
                            row[static_cast<std::int64_t>(oi) * ow + oj];
                    }
                }
            }
}
}  // namespace

Tensor Conv2dLayer::forward(const Tensor& x, bool) {
    if (x.shape.size() != 4 || x.dim(1) != in_c_)
        throw std::invalid_argument("conv: expected (B," + std::to_string(in_c_) +
                                    ",H,W), got " + shape_str(x.shape));
    input_ = x;
    const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = conv_out(h, pad_, k_, stride_), ow = conv_out(w, pad_, k_, stride_);
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("conv: output spatial dims collapse below 1");

    Tensor y({batch, out_c_, oh, ow});
    const int patch = in_c_ * k_ * k_;
    std::vector<double> col(static_cast<size_t>(patch) * oh * ow);
    for (int b = 0; b < batch; ++b) {
        const double* xb = x.ptr() + static_cast<std::int64_t>(b) * in_c_ * h * w;
        double* yb = y.ptr() + static_cast<std::int64_t>(b) * out_c_ * oh * ow;
        im2col(xb, in_c_, h, w, k_, stride_, pad_, oh, ow, col.data());
        // Y_b = F col  ->  (out_c) x (oh*ow)
        gemm(false, false, out_c_, oh * ow, patch, 1.0, filters.ptr(), patch,
             col.data(), oh * ow, 0.0, yb, oh * ow);
        for (int c = 0; c < out_c_; ++c) {
            const double bc = bias.data[static_cast<size_t>(c)];
            double* plane = yb + static_cast<std::int64_t>(c) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) plane[i] += bc;
        }
    }
    return y;
}

Tensor Conv2dLayer::backward(const Tensor& grad_out) {
    const int batch = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
    const int oh = conv_out(h, pad_, k_, stride_), ow = conv_out(w, pad_, k_, stride_);
    require_shape(grad_out, {batch, out_c_, oh, ow}, "conv backward");

    const int patch = in_c_ * k_ * k_;
    std::fill(f_grad_.data.begin(), f_grad_.data.end(), 0.0);
    std::fill(b_grad_.data.begin(), b_grad_.data.end(), 0.0);
    Tensor dx(input_.shape);
    std::vector<double> col(static_cast<size_t>(patch) * oh * ow);
    std::vector<double> dcol(col.size());
    for (int b = 0; b < batch; ++b) {
        const double* xb = input_.ptr() + static_cast<std::int64_t>(b) * in_c_ * h * w;
        const double* gb = grad_out.ptr() + static_cast<std::int64_t>(b) * out_c_ * oh * ow;
        im2col(xb, in_c_, h, w, k_, stride_, pad_, oh, ow, col.data());
        // dF += dY_b col^T ; dcol = F^T dY_b
        gemm(false, true, out_c_, patch, oh * ow, 1.0, gb, oh * ow, col.data(),
             oh * ow, 1.0, f_grad_.ptr(), patch);
        gemm(true, false, patch, oh * ow, out_c_, 1.0, filters.ptr(), patch, gb,
             oh * ow, 0.0, dcol.data(), oh * ow);
        col2im_add(dcol.data(), in_c_, h, w, k_, stride_, pad_, oh, ow,
                   dx.ptr() + static_cast<std::int64_t>(b) * in_c_ * h * w);
        for (int c = 0; c < out_c_; ++c) {
            const double* plane = gb + static_cast<std::int64_t>(c) * oh * ow;
            double s = 0.0;
            for (int i = 0; i < oh * ow; ++i) s += plane[i];
            b_grad_.data[static_cast<size_t>(c)] += s;
        }
    }
    return dx;
}

std::vector<ParamBlock> Conv2dLayer::params() {
    return {{"conv.filters", &filters, &f_grad_},
            {"conv.bias", &bias, &b_grad_}};
}

std::string Conv2dLayer::descriptor() const {
    std::ostringstream os;
    os << "conv2d " << in_c_ << ' ' << out_c_ << ' ' << k_ << ' ' << stride_
       << ' ' << pad_;
    return os.str();
}

// ---------------------------------------------------------------------------
// MaxPool

MaxPoolLayer::MaxPoolLayer(int kernel, int stride) : k_(kernel), stride_(stride) {
    if (kernel < 1 || stride < 1)
        throw std::invalid_argument("maxpool: kernel and stride must be >= 1");
}

Tensor MaxPoolLayer::forward(const Tensor& x, bool) {
    if (x.shape.size() != 4)
        throw std::invalid_argument("maxpool: expected (B,C,H,W), got " +
                                    shape_str(x.shape));
    const int batch = x.dim(0), c_n = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = (h - k_) / stride_ + 1, ow = (w - k_) / stride_ + 1;
    if (oh < 1 || ow < 1)
        throw std::invalid_argument("maxpool: output spatial dims collapse below 1");
    in_shape_ = x.shape;
    Tensor y({batch, c_n, oh, ow});
    argmax_.assign(y.data.size(), 0);
    std::int64_t out_idx = 0;
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < c_n; ++c) {
            const double* plane = x.ptr() + (static_cast<std::int64_t>(b) * c_n + c) * h * w;
            const std::int64_t plane_off = (static_cast<std::int64_t>(b) * c_n + c) * h * w;
            for (int oi = 0; oi < oh; ++oi)
                for (int oj = 0; oj < ow; ++oj) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::int64_t best_idx = 0;
                    for (int ki = 0; ki < k_; ++ki)
                        for (int kj = 0; kj < k_; ++kj) {
                            const int ii = oi * stride_ + ki, jj = oj * stride_ + kj;
                            const double v = plane[static_cast<std::int64_t>(ii) * w + jj];
                            // first occurrence wins ties (row-major scan)
                            if (v > best) {
                                best = v;
                                best_idx = plane_off + static_cast<std::int64_t>(ii) * w + jj;
                            }
                        }
                    y.data[static_cast<size_t>(out_idx)] = best;
                    argmax_[static_cast<size_t>(out_idx)] = best_idx;
                    ++out_idx;
                }
        }
    return y;
}

Tensor MaxPoolLayer::backward(const Tensor& grad_out) {
    if (grad_out.size() != static_cast<std::int64_t>(argmax_.size()))
        throw std::invalid_argument("maxpool backward: gradient size mismatch");
    Tensor dx(in_shape_);
    for (size_t i = 0; i < argmax_.size(); ++i)
        dx.data[static_cast<size_t>(argmax_[i])] += grad_out.data[i];
    return dx;
}

std::string MaxPoolLayer::descriptor() const {
    return "maxpool " + std::to_string(k_) + " " + std::to_string(stride_);
}

// ---------------------------------------------------------------------------
// ReLU / Dropout / Flatten

Tensor ReluLayer::forward(const Tensor& x, bool) {
    Tensor y = x;
    mask_.assign(x.data.size(), 0);
    for (size_t i = 0; i < y.data.size(); ++i) {
        if (y.data[i] > 0.0) mask_[i] = 1;
        else y.data[i] = 0.0;
    }
    return y;
}

Tensor ReluLayer::backward(const Tensor& grad_out) {
    if (grad_out.data.size() != mask_.size())
        throw std::invalid_argument("relu backward: gradient size mismatch");
    Tensor dx = grad_out;
    for (size_t i = 0; i < dx.data.size(); ++i)
        if (!mask_[i]) dx.data[i] = 0.0;
    return dx;
}

DropoutLayer::DropoutLayer(double p, Rng& rng) : p_(p), rng_(&rng) {
    if (p < 0.0 || p >= 1.0)
        throw std::invalid_argument("dropout: p must lie in [0, 1)");
}

Tensor DropoutLayer::forward(const Tensor& x, bool train) {
    last_train_ = train;
    if (!train) return x;
    const double scale = 1.0 / (1.0 - p_);
    Tensor y = x;
    mask_.assign(x.data.size(), 0.0);
    for (size_t i = 0; i < y.data.size(); ++i) {
        mask_[i] = rng_->u01() >= p_ ? scale : 0.0;
        y.data[i] *= mask_[i];
    }
    return y;
}

Tensor DropoutLayer::backward(const Tensor& grad_out) {
    if (!last_train_) return grad_out;
    Tensor dx = grad_out;
    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= mask_[i];
    return dx;
}

std::string DropoutLayer::descriptor() const {
    std::ostringstream os;
    os << "dropout " << p_;
    return os.str();
}

Tensor FlattenLayer::forward(const Tensor& x, bool) {
    in_shape_ = x.shape;
    Tensor y = x;
    int rest = 1;
    for (size_t i = 1; i < x.shape.size(); ++i) rest *= x.shape[i];
    y.shape = {x.dim(0), rest};
    return y;
}

Tensor FlattenLayer::backward(const Tensor& grad_out) {
    Tensor dx = grad_out;
    dx.shape = in_shape_;
    return dx;
}

// ---------------------------------------------------------------------------
// Model

Model& Model::dense(int in, int out) {
    layers_.push_back(std::make_unique<DenseLayer>(in, out, rng_));
    return *this;
}
Model& Model::conv2d(int in_c, int out_c, int kernel, int stride, int padding) {
    layers_.push_back(
        std::make_unique<Conv2dLayer>(in_c, out_c, kernel, stride, padding, rng_));
    return *this;
}
Model& Model::maxpool(int kernel, int stride) {
    layers_.push_back(std::make_unique<MaxPoolLayer>(kernel, stride));
    return *this;
}
Model& Model::relu() {
    layers_.push_back(std::make_unique<ReluLayer>());
    return *this;
}
Model& Model::dropout(double p) {
    layers_.push_back(std::make_unique<DropoutLayer>(p, rng_));
    return *this;
}
Model& Model::flatten() {
    layers_.push_back(std::make_unique<FlattenLayer>());
    return *this;
}

Tensor Model::forward(const Tensor& x, bool train) {
    Tensor y = x;
    for (auto& l : layers_) y = l->forward(y, train);
    return y;
}

void Model::backward(const Tensor& loss_grad) {
    Tensor g = loss_grad;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        g = (*it)->backward(g);
}

std::vector<ParamBlock> Model::params() {
    std::vector<ParamBlock> out;
    for (size_t i = 0; i < layers_.size(); ++i)
        for (ParamBlock b : layers_[i]->params()) {
            b.name = "layer" + std::to_string(i) + "." + b.name;
            out.push_back(b);
        }
    return out;
}

std::int64_t Model::param_count() {
    std::int64_t n = 0;
    for (const ParamBlock& b : params()) n += b.value->size();
    return n;
}

std::vector<std::string> Model::descriptors() const {
    std::vector<std::string> out;
    for (const auto& l : layers_) out.push_back(l->descriptor());
    return out;
}

Model Model::from_descriptors(const std::vector<std::string>& lines,
                              std::uint64_t seed) {
    Model m(seed);
    for (const std::string& line : lines) {
        std::istringstream ss(line);
        std::string kind;
        ss >> kind;
        if (kind == "dense") {
            int in, out;
            ss >> in >> out;
            m.dense(in, out);
        } else if (kind == "conv2d") {
            int ic, oc, k, s, p;
            ss >> ic >> oc >> k >> s >> p;
            m.conv2d(ic, oc, k, s, p);
        } else if (kind == "maxpool") {
            int k, s;
            ss >> k >> s;
            m.maxpool(k, s);
        } else if (kind == "relu") {
            m.relu();
        } else if (kind == "dropout") {
            double p;
            ss >> p;
            m.dropout(p);
        } else if (kind == "flatten") {
            m.flatten();
        } else {
            throw std::runtime_error("model: unknown layer descriptor: " + line);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Loss / optimizer / gradient check

MseResult mse(const Tensor& pred, const Tensor& target) {
    if (pred.shape != target.shape)
        throw std::invalid_argument("mse: shape mismatch " + shape_str(pred.shape) +
                                    " vs " + shape_str(target.shape));
    const auto n = static_cast<double>(pred.data.size());
    MseResult r{0.0, Tensor(pred.shape)};
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        r.loss += d * d;
        r.grad.data[i] = 2.0 * d / n;
    }
    r.loss /= n;
    return r;
}

Adam::Adam(Model& model, double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(epsilon) {
    for (const ParamBlock& b : model.params()) {
        m_.emplace_back(b.value->shape);
        v_.emplace_back(b.value->shape);
    }
}

void Adam::step(Model& model) {
    auto blocks = model.params();
    if (blocks.size() != m_.size())
        throw std::logic_error("adam: parameter block count changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (size_t i = 0; i < blocks.size(); ++i) {
        double* p = blocks[i].value->ptr();
        const double* g = blocks[i].grad->ptr();
        double* m = m_[i].ptr();
        double* v = v_[i].ptr();
        const auto n = static_cast<size_t>(blocks[i].value->size());
        for (size_t j = 0; j < n; ++j) {
            if (!std::isfinite(g[j]))
                throw std::runtime_error("adam: non-finite gradient in " + blocks[i].name);
            m[j] = b1_ * m[j] + (1.0 - b1_) * g[j];
            v[j] = b2_ * v[j] + (1.0 - b2_) * g[j] * g[j];
            p[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
        }
    }
}

double grad_check(Model& model, const Tensor& input, const Tensor& target,
                  double eps) {
    Tensor pred = model.forward(input, false);
    MseResult r = mse(pred, target);
    model.backward(r.grad);

    std::vector<Tensor> analytic;
    for (const ParamBlock& b : model.params()) analytic.push_back(*b.grad);

    double worst = 0.0;
    auto blocks = model.params();
    for (size_t i = 0; i < blocks.size(); ++i) {
        double* p = blocks[i].value->ptr();
        for (std::int64_t j = 0; j < blocks[i].value->size(); ++j) {
            const double saved = p[j];
            p[j] = saved + eps;
            const double up = mse(model.forward(input, false), target).loss;
            p[j] = saved - eps;
            const double down = mse(model.forward(input, false), target).loss;
            p[j] = saved;
            const double fd = (up - down) / (2.0 * eps);
            const double ga = analytic[i].data[static_cast<size_t>(j)];
            const double denom = std::max(std::abs(fd) + std::abs(ga), 1e-8);
            worst = std::max(worst, std::abs(fd - ga) / denom);
        }
    }
    return worst;
}

}  // namespace g2cal::nn
