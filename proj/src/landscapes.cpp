#include "sgdlab/landscapes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgdlab/errors.hpp"
#include "sgdlab/rng.hpp"

namespace sgdlab {

namespace {

void check_theta(const Landscape& l, std::span<const double> theta) {
    if (static_cast<int>(theta.size()) != l.dim())
        throw std::invalid_argument("landscape: theta has wrong dimension");
}

void check_batch(std::span<const int> batch, int sample_count) {
    if (batch.empty()) throw std::invalid_argument("minibatch_grad: empty index set");
    for (int j : batch)
        if (j < 0 || j >= sample_count)
            throw std::invalid_argument("minibatch_grad: sample index out of range");
}

double stable_softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

void Landscape::minibatch_grad(std::span<const double> theta, std::span<const int>,
                               std::span<double> out) const {
    grad(theta, out);
}

Dataset generate_dataset(const DatasetSpec& spec) {
    if (spec.samples <= 0) throw std::invalid_argument("DatasetSpec: samples must be positive");
    if (spec.input_dim <= 0) throw std::invalid_argument("DatasetSpec: input_dim must be positive");
    if (spec.label_rule != "random-binary")
        throw std::invalid_argument("DatasetSpec: unknown label_rule '" + spec.label_rule + "'");

    Dataset ds;
    ds.spec = spec;
    ds.x.resize(static_cast<std::size_t>(spec.samples) * spec.input_dim);
    RngStream rng(spec.seed, /*idx_a=*/0xDA7AULL);
    for (double& v : ds.x) v = rng.normal();

    // balanced labels: floor(m/2) ones, then a seeded Fisher-Yates shuffle
    ds.y.assign(spec.samples, 0);
    for (int j = 0; j < spec.samples / 2; ++j) ds.y[j] = 1;
    for (int j = spec.samples - 1; j > 0; --j) {
        const int k = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(j) + 1));
        std::swap(ds.y[j], ds.y[k]);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Styblinski-Tang
// ---------------------------------------------------------------------------

namespace st {
double value_1d(double t) { return 0.5 * (t * t * t * t - 16.0 * t * t + 5.0 * t); }
double grad_1d(double t) { return 2.0 * t * t * t - 16.0 * t + 2.5; }
double hess_1d(double t) { return 6.0 * t * t - 16.0; }
double barrier_height() { return value_1d(kSaddle) - value_1d(kMinimum); }
}  // namespace st

namespace {

class StLandscape final : public Landscape {
public:
    explicit StLandscape(int dim) : dim_(dim) {
        if (dim < 1) throw std::invalid_argument("st_landscape: dim must be >= 1");
    }

    int dim() const override { return dim_; }

    double loss(std::span<const double> theta) const override {
        check_theta(*this, theta);
        double s = 0.0;
        for (double t : theta) s += st::value_1d(t);
        return s;
    }

    void grad(std::span<const double> theta, std::span<double> out) const override {
        check_theta(*this, theta);
        for (int i = 0; i < dim_; ++i) out[i] = st::grad_1d(theta[i]);
    }

    Mat hessian(std::span<const double> theta) const override {
        check_theta(*this, theta);
        Mat h(dim_, dim_);
        for (int i = 0; i < dim_; ++i) h(i, i) = st::hess_1d(theta[i]);
        return h;
    }

private:
    int dim_;
};

class ShiftedStLandscape final : public Landscape {
public:
    ShiftedStLandscape(int dim, const DatasetSpec& spec) : data_(generate_dataset(spec)) {
        if (spec.input_dim != dim)
            throw std::invalid_argument("shifted_st_landscape: dataset.input_dim must equal dim");
    }

    int dim() const override { return data_.spec.input_dim; }
    int sample_count() const override { return data_.spec.samples; }

    double loss(std::span<const double> theta) const override {
        check_theta(*this, theta);
        double s = 0.0;
        for (int j = 0; j < data_.spec.samples; ++j) {
            auto x = data_.sample(j);
            for (int i = 0; i < dim(); ++i) s += st::value_1d(theta[i] - x[i]);
        }
        return s / data_.spec.samples;
    }

    void grad(std::span<const double> theta, std::span<double> out) const override {
        std::vector<int> all(data_.spec.samples);
        for (int j = 0; j < data_.spec.samples; ++j) all[j] = j;
        minibatch_grad(theta, all, out);
    }

    void minibatch_grad(std::span<const double> theta, std::span<const int> batch,
                        std::span<double> out) const override {
        check_theta(*this, theta);
        check_batch(batch, sample_count());
        std::fill(out.begin(), out.end(), 0.0);
        for (int j : batch) {
            auto x = data_.sample(j);
            for (int i = 0; i < dim(); ++i) out[i] += st::grad_1d(theta[i] - x[i]);
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (double& g : out) g *= inv;
    }

    Mat hessian(std::span<const double> theta) const override {
        check_theta(*this, theta);
        Mat h(dim(), dim());
        for (int j = 0; j < data_.spec.samples; ++j) {
            auto x = data_.sample(j);
            for (int i = 0; i < dim(); ++i) h(i, i) += st::hess_1d(theta[i] - x[i]);
        }
        for (int i = 0; i < dim(); ++i) h(i, i) /= data_.spec.samples;
        return h;
    }

private:
    Dataset data_;
};

// ---------------------------------------------------------------------------
// Logistic regression on synthetic Gaussian data
// ---------------------------------------------------------------------------

class LogisticLandscape final : public Landscape {
public:
    explicit LogisticLandscape(const DatasetSpec& spec) : data_(generate_dataset(spec)) {}

    int dim() const override { return data_.spec.input_dim; }
    int sample_count() const override { return data_.spec.samples; }

    double loss(std::span<const double> theta) const override {
        check_theta(*this, theta);
        double s = 0.0;
        for (int j = 0; j < data_.spec.samples; ++j) {
            const double z = dot(theta, data_.sample(j));
            s += stable_softplus(z) - static_cast<double>(data_.y[j]) * z;
        }
        return s / data_.spec.samples;
    }

    void grad(std::span<const double> theta, std::span<double> out) const override {
        std::vector<int> all(data_.spec.samples);
        for (int j = 0; j < data_.spec.samples; ++j) all[j] = j;
        minibatch_grad(theta, all, out);
    }

    void minibatch_grad(std::span<const double> theta, std::span<const int> batch,
                        std::span<double> out) const override {
        check_theta(*this, theta);
        check_batch(batch, sample_count());
        std::fill(out.begin(), out.end(), 0.0);
        for (int j : batch) {
            auto x = data_.sample(j);
            const double r = sigmoid(dot(theta, x)) - static_cast<double>(data_.y[j]);
            axpy(r, x, out);
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (double& g : out) g *= inv;
    }

    Mat hessian(std::span<const double> theta) const override {
        check_theta(*this, theta);
        const int d = dim();
        Mat h(d, d);
        for (int j = 0; j < data_.spec.samples; ++j) {
            auto x = data_.sample(j);
            const double p = sigmoid(dot(theta, x));
            const double w = p * (1.0 - p);
            for (int a = 0; a < d; ++a) {
                const double wxa = w * x[a];
                for (int b = a; b < d; ++b) h(a, b) += wxa * x[b];
            }
        }
        for (int a = 0; a < d; ++a)
            for (int b = a; b < d; ++b) {
                h(a, b) /= data_.spec.samples;
                h(b, a) = h(a, b);
            }
        return h;
    }

private:
    Dataset data_;
};

// ---------------------------------------------------------------------------
// MLP binary classifier
// ---------------------------------------------------------------------------

class MlpLandscape final : public Landscape {
public:
    MlpLandscape(const DatasetSpec& spec, int width, int depth, Activation act)
        : data_(generate_dataset(spec)), width_(width), depth_(depth), act_(act) {
        if (width < 1) throw std::invalid_argument("mlp_landscape: width must be >= 1");
        if (depth < 2) throw std::invalid_argument("mlp_landscape: depth must be >= 2");
        sizes_.push_back(spec.input_dim);
        for (int l = 1; l < depth; ++l) sizes_.push_back(width);
        sizes_.push_back(1);
        dim_ = 0;
        for (int l = 0; l < depth_; ++l) dim_ += sizes_[l + 1] * (sizes_[l] + 1);
    }

    int dim() const override { return dim_; }
    int sample_count() const override { return data_.spec.samples; }

    double loss(std::span<const double> theta) const override {
        check_theta(*this, theta);
        Scratch s(sizes_);
        double total = 0.0;
        for (int j = 0; j < data_.spec.samples; ++j) {
            const double z = forward(theta, data_.sample(j), s);
            total += stable_softplus(z) - static_cast<double>(data_.y[j]) * z;
        }
        return total / data_.spec.samples;
    }

    void grad(std::span<const double> theta, std::span<double> out) const override {
        std::vector<int> all(data_.spec.samples);
        for (int j = 0; j < data_.spec.samples; ++j) all[j] = j;
        minibatch_grad(theta, all, out);
    }

    void minibatch_grad(std::span<const double> theta, std::span<const int> batch,
                        std::span<double> out) const override {
        check_theta(*this, theta);
        check_batch(batch, sample_count());
        std::fill(out.begin(), out.end(), 0.0);
        Scratch s(sizes_);
        for (int j : batch) {
            const double z = forward(theta, data_.sample(j), s);
            backward(theta, data_.sample(j), sigmoid(z) - static_cast<double>(data_.y[j]), s, out);
        }
        const double inv = 1.0 / static_cast<double>(batch.size());
        for (double& g : out) g *= inv;
    }

    Mat hessian(std::span<const double> theta) const override {
        return hessian_fd(*this, theta, 1e-4);
    }

private:
    struct Scratch {
        // activations h[l] and pre-activations z[l] per layer
        std::vector<Vec> h, z, delta;
        explicit Scratch(const std::vector<int>& sizes) {
            const int layers = static_cast<int>(sizes.size()) - 1;
            h.resize(layers + 1);
            z.resize(layers);
            delta.resize(layers);
            for (int l = 0; l <= layers; ++l) h[l].resize(sizes[l]);
            for (int l = 0; l < layers; ++l) {
                z[l].resize(sizes[l + 1]);
                delta[l].resize(sizes[l + 1]);
            }
        }
    };

    // theta layout per layer: weights (out x in, row-major), then biases
    std::size_t layer_offset(int layer) const {
        std::size_t off = 0;
        for (int l = 0; l < layer; ++l) off += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
        return off;
    }

    double activate(double v) const {
        return act_ == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
    }
    double activate_deriv(double pre, double post) const {
        return act_ == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
    }

    double forward(std::span<const double> theta, std::span<const double> x, Scratch& s) const {
        std::copy(x.begin(), x.end(), s.h[0].begin());
        std::size_t off = 0;
        for (int l = 0; l < depth_; ++l) {
            const int in = sizes_[l], out = sizes_[l + 1];
            const double* w = theta.data() + off;
            const double* b = w + static_cast<std::size_t>(out) * in;
            for (int o = 0; o < out; ++o) {
                double acc = b[o];
                const double* row = w + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) acc += row[i] * s.h[l][i];
                s.z[l][o] = acc;
                s.h[l + 1][o] = (l + 1 < depth_) ? activate(acc) : acc;
            }
            off += static_cast<std::size_t>(out) * (in + 1);
        }
        return s.z[depth_ - 1][0];
    }

    // accumulates d(loss_j)/d(theta) into out, given dloss/dlogit
    void backward(std::span<const double> theta, std::span<const double> x, double dlogit,
                  Scratch& s, std::span<double> out) const {
        (void)x;
        s.delta[depth_ - 1][0] = dlogit;
        for (int l = depth_ - 1; l > 0; --l) {
            const int in = sizes_[l], out_n = sizes_[l + 1];
            const double* w = theta.data() + layer_offset(l);
            for (int i = 0; i < in; ++i) {
                double acc = 0.0;
                for (int o = 0; o < out_n; ++o) acc += w[static_cast<std::size_t>(o) * in + i] * s.delta[l][o];
                s.delta[l - 1][i] = acc * activate_deriv(s.z[l - 1][i], s.h[l][i]);
            }
        }
        for (int l = 0; l < depth_; ++l) {
            const int in = sizes_[l], out_n = sizes_[l + 1];
            double* gw = out.data() + layer_offset(l);
            double* gb = gw + static_cast<std::size_t>(out_n) * in;
            for (int o = 0; o < out_n; ++o) {
                const double d = s.delta[l][o];
                double* grow = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) grow[i] += d * s.h[l][i];
                gb[o] += d;
            }
        }
    }

    Dataset data_;
    int width_, depth_, dim_;
    Activation act_;
    std::vector<int> sizes_;
};

// ---------------------------------------------------------------------------
// Small analytic surfaces
// ---------------------------------------------------------------------------

class QuadraticLandscape final : public Landscape {
public:
    explicit QuadraticLandscape(Vec diag_h) : h_(std::move(diag_h)) {
        if (h_.empty()) throw std::invalid_argument("quadratic_landscape: empty diagonal");
    }
    int dim() const override { return static_cast<int>(h_.size()); }
    double loss(std::span<const double> theta) const override {
        check_theta(*this, theta);
        double s = 0.0;
        for (int i = 0; i < dim(); ++i) s += 0.5 * h_[i] * theta[i] * theta[i];
        return s;
    }
    void grad(std::span<const double> theta, std::span<double> out) const override {
        check_theta(*this, theta);
        for (int i = 0; i < dim(); ++i) out[i] = h_[i] * theta[i];
    }
    Mat hessian(std::span<const double> theta) const override {
        check_theta(*this, theta);
        return Mat::diag(h_);
    }

private:
    Vec h_;
};

class DoubleWellLandscape final : public Landscape {
public:
    DoubleWellLandscape(double h, double tilt) : h_(h), tilt_(tilt) {
        if (h <= 0.0) throw std::invalid_argument("double_well_landscape: h must be positive");
    }
    int dim() const override { return 1; }
    double loss(std::span<const double> theta) const override {
        const double q = theta[0] * theta[0] - 1.0;
        return h_ * q * q + tilt_ * theta[0];
    }
    void grad(std::span<const double> theta, std::span<double> out) const override {
        out[0] = 4.0 * h_ * theta[0] * (theta[0] * theta[0] - 1.0) + tilt_;
    }
    Mat hessian(std::span<const double> theta) const override {
        Mat m(1, 1);
        m(0, 0) = 4.0 * h_ * (3.0 * theta[0] * theta[0] - 1.0);
        return m;
    }

private:
    double h_, tilt_;
};

// Reusable per-thread scratch for scaled coordinates. A small stack rather
// than a single buffer so nested rescales do not clobber each other.
thread_local std::vector<Vec> tl_scale_pool;
thread_local int tl_scale_depth = 0;

struct ScaleScratch {
    Vec* buf;
    ScaleScratch(std::span<const double> theta, double factor) {
        if (static_cast<int>(tl_scale_pool.size()) <= tl_scale_depth)
            tl_scale_pool.emplace_back();
        buf = &tl_scale_pool[tl_scale_depth++];
        buf->resize(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) (*buf)[i] = factor * theta[i];
    }
    ~ScaleScratch() { --tl_scale_depth; }
    ScaleScratch(const ScaleScratch&) = delete;
    ScaleScratch& operator=(const ScaleScratch&) = delete;
};

class ScaledLandscape final : public Landscape {
public:
    ScaledLandscape(LandscapePtr base, double k)
        : base_(std::move(base)), k_(k), sqrt_k_(std::sqrt(k)) {
        if (k <= 0.0) throw std::invalid_argument("rescale: k must be positive");
    }

    int dim() const override { return base_->dim(); }
    int sample_count() const override { return base_->sample_count(); }

    double loss(std::span<const double> theta) const override {
        ScaleScratch s(theta, sqrt_k_);
        return base_->loss(*s.buf);
    }
    void grad(std::span<const double> theta, std::span<double> out) const override {
        ScaleScratch s(theta, sqrt_k_);
        base_->grad(*s.buf, out);
        for (double& g : out) g *= sqrt_k_;
    }
    void minibatch_grad(std::span<const double> theta, std::span<const int> batch,
                        std::span<double> out) const override {
        ScaleScratch s(theta, sqrt_k_);
        base_->minibatch_grad(*s.buf, batch, out);
        for (double& g : out) g *= sqrt_k_;
    }
    Mat hessian(std::span<const double> theta) const override {
        ScaleScratch s(theta, sqrt_k_);
        Mat h = base_->hessian(*s.buf);
        for (double& v : h.data()) v *= k_;
        return h;
    }

private:
    LandscapePtr base_;
    double k_, sqrt_k_;
};

}  // namespace

LandscapePtr st_landscape(int dim) { return std::make_shared<StLandscape>(dim); }

LandscapePtr shifted_st_landscape(int dim, const DatasetSpec& dataset) {
    return std::make_shared<ShiftedStLandscape>(dim, dataset);
}

LandscapePtr logistic_landscape(const DatasetSpec& dataset) {
    return std::make_shared<LogisticLandscape>(dataset);
}

LandscapePtr mlp_landscape(const DatasetSpec& dataset, int width, int depth,
                           Activation activation) {
    return std::make_shared<MlpLandscape>(dataset, width, depth, activation);
}

LandscapePtr quadratic_landscape(Vec diag_h) {
    return std::make_shared<QuadraticLandscape>(std::move(diag_h));
}

LandscapePtr double_well_landscape(double h, double tilt) {
    return std::make_shared<DoubleWellLandscape>(h, tilt);
}

LandscapePtr rescale(LandscapePtr base, double k) {
    if (!base) throw std::invalid_argument("rescale: null base landscape");
    return std::make_shared<ScaledLandscape>(std::move(base), k);
}

Mat hessian_fd(const Landscape& landscape, std::span<const double> theta, double step) {
    if (step <= 0.0) throw std::invalid_argument("hessian_fd: step must be positive");
    const int n = landscape.dim();
    Vec point(theta.begin(), theta.end());
    Vec gp(n), gm(n);
    Mat h(n, n);
    for (int j = 0; j < n; ++j) {
        const double hj = step * (1.0 + std::abs(theta[j]));
        const double saved = point[j];
        point[j] = saved + hj;
        landscape.grad(point, gp);
        point[j] = saved - hj;
        landscape.grad(point, gm);
        point[j] = saved;
        for (int i = 0; i < n; ++i) {
            const double v = (gp[i] - gm[i]) / (2.0 * hj);
            if (!std::isfinite(v)) throw numerical_error("hessian_fd: non-finite gradient");
            h(i, j) = v;
        }
    }
    return symmetrize(h);
}

PretrainResult pretrain_to_critical(const Landscape& landscape, Vec start, double eta,
                                    double grad_tol, std::int64_t max_iters) {
    if (eta <= 0.0) throw std::invalid_argument("pretrain_to_critical: eta must be positive");
    PretrainResult res;
    res.theta = std::move(start);
    Vec g(landscape.dim());
    for (res.iterations = 0; res.iterations < max_iters; ++res.iterations) {
        landscape.grad(res.theta, g);
        res.grad_norm = norm2(g);
        if (!std::isfinite(res.grad_norm))
            throw numerical_error("pretrain_to_critical: non-finite gradient");
        if (res.grad_norm <= grad_tol) {
            res.converged = true;
            return res;
        }
        axpy(-eta, g, res.theta);
    }
    landscape.grad(res.theta, g);
    res.grad_norm = norm2(g);
    res.converged = res.grad_norm <= grad_tol;
    return res;
}

}  // namespace sgdlab
