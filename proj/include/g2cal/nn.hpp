#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace g2cal::nn {

/// Row-major FP64 tensor.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
};

/// Deterministic stream used for init, dropout and shuffling.
struct Rng {
    std::uint64_t state;
    explicit Rng(std::uint64_t seed) : state(seed ^ 0xA3C59AC2ED1F2FB1ULL) {}
    std::uint64_t next();
    double u01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }
};

struct ParamBlock {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<ParamBlock> params() { return {}; }
    virtual std::string descriptor() const = 0;
};

class DenseLayer : public Layer {
public:
    DenseLayer(int in, int out, Rng& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamBlock> params() override;
    std::string descriptor() const override;

    Tensor weights;  // out x in
    Tensor bias;     // out

private:
    Tensor w_grad_, b_grad_, input_;
    int in_, out_;
};

class Conv2dLayer : public Layer {
public:
    Conv2dLayer(int in_channels, int out_channels, int kernel, int stride,
                int padding, Rng& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<ParamBlock> params() override;
    std::string descriptor() const override;

    Tensor filters;  // out_c x in_c x k x k
    Tensor bias;     // out_c

private:
    Tensor f_grad_, b_grad_, input_;
    int in_c_, out_c_, k_, stride_, pad_;
};

class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(int kernel, int stride);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string descriptor() const override;

private:
    int k_, stride_;
    std::vector<int> in_shape_;
    std::vector<std::int64_t> argmax_;
};

class ReluLayer : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string descriptor() const override { return "relu"; }

private:
    std::vector<char> mask_;
};

/// Inverted dropout: train mode zeroes with probability p and scales
/// survivors by 1/(1-p); eval mode is the identity.
class DropoutLayer : public Layer {
public:
    DropoutLayer(double p, Rng& rng);
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string descriptor() const override;

private:
    double p_;
    Rng* rng_;
    bool last_train_ = false;
    std::vector<double> mask_;
};

class FlattenLayer : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& grad_out) override;
    std::string descriptor() const override { return "flatten"; }

private:
    std::vector<int> in_shape_;
};

class Model {
public:
    explicit Model(std::uint64_t seed) : rng_(seed) {}

    Model& dense(int in, int out);
    Model& conv2d(int in_c, int out_c, int kernel, int stride, int padding);
    Model& maxpool(int kernel, int stride);
    Model& relu();
    Model& dropout(double p);
    Model& flatten();

    Tensor forward(const Tensor& x, bool train);
    /// Propagates the loss gradient back through all layers, filling
    /// parameter gradients.
    void backward(const Tensor& loss_grad);

    std::vector<ParamBlock> params();
    std::int64_t param_count();
    Rng& rng() { return rng_; }
    std::vector<std::string> descriptors() const;

    static Model from_descriptors(const std::vector<std::string>& lines,
                                  std::uint64_t seed);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    Rng rng_;
};

struct MseResult {
    double loss;
    Tensor grad;  // d loss / d pred
};
/// Mean over all entries of (pred - target)^2.
MseResult mse(const Tensor& pred, const Tensor& target);

class Adam {
public:
    Adam(Model& model, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double epsilon = 1e-8);
    void step(Model& model);
    std::int64_t steps() const { return t_; }
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<Tensor> m_, v_;
    std::int64_t t_ = 0;
    double lr_, b1_, b2_, eps_;
};

/// Max relative error between backprop gradients and a central finite
/// difference of the MSE loss, over every parameter entry. Run in eval
/// mode so dropout is inert.
double grad_check(Model& model, const Tensor& input, const Tensor& target,
                  double eps = 1e-6);

}  // namespace g2cal::nn
