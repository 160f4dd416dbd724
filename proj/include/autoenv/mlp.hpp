#pragma once

// Dense feed-forward networks on Eigen with explicit reverse-mode gradients.
// Samples are columns.

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace autoenv::rl {

enum class OutputActivation { identity, tanh };

template <class T>
class Mlp {
public:
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

    struct Cache {
        std::vector<Mat> a;  // a[0] input, a[l] output of layer l (post-activation)
    };

    struct Grads {
        std::vector<Mat> w;
        std::vector<Vec> b;
    };

    Mlp() = default;

    /// Zero-initialized network with layer sizes {in, h1, ..., out}.
    Mlp(std::vector<std::size_t> sizes, OutputActivation out) : sizes_(std::move(sizes)), out_(out) {
        if (sizes_.size() < 2) {
            throw std::invalid_argument("an MLP needs at least input and output sizes");
        }
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            w.push_back(Mat::Zero(static_cast<Eigen::Index>(sizes_[l + 1]), static_cast<Eigen::Index>(sizes_[l])));
            b.push_back(Vec::Zero(static_cast<Eigen::Index>(sizes_[l + 1])));
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); the last layer uses +-final_scale.
    void init(std::mt19937_64& rng, double final_scale = 3e-3) {
        for (std::size_t l = 0; l < w.size(); ++l) {
            const double s = l + 1 == w.size() ? final_scale : 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
            std::uniform_real_distribution<double> u(-s, s);
            for (Eigen::Index i = 0; i < w[l].size(); ++i) w[l].data()[i] = static_cast<T>(u(rng));
            for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l].data()[i] = static_cast<T>(u(rng));
        }
    }

    [[nodiscard]] const std::vector<std::size_t>& sizes() const { return sizes_; }
    [[nodiscard]] OutputActivation output() const { return out_; }
    [[nodiscard]] std::size_t layers() const { return w.size(); }
    [[nodiscard]] std::size_t input_size() const { return sizes_.front(); }
    [[nodiscard]] std::size_t output_size() const { return sizes_.back(); }

    [[nodiscard]] Mat forward(const Mat& x) const {
        Mat a = x;
        for (std::size_t l = 0; l < w.size(); ++l) {
            Mat z = (w[l] * a).colwise() + b[l];
            activate(z, l);
            a = std::move(z);
        }
        return a;
    }

    Mat forward(const Mat& x, Cache& cache) const {
        cache.a.resize(w.size() + 1);
        cache.a[0] = x;
        for (std::size_t l = 0; l < w.size(); ++l) {
            Mat z = (w[l] * cache.a[l]).colwise() + b[l];
            activate(z, l);
            cache.a[l + 1] = std::move(z);
        }
        return cache.a.back();
    }

    /// Accumulate-free backward pass: writes parameter gradients of
    /// sum(upstream .* output) into g and returns the gradient w.r.t. the input.
    Mat backward(const Cache& cache, const Mat& upstream, Grads& g) const {
        const std::size_t n = w.size();
        g.w.resize(n);
        g.b.resize(n);
        Mat delta = upstream;
        const Mat& out = cache.a[n];
        if (out_ == OutputActivation::tanh) {
            delta.array() *= (T(1) - out.array().square());
        }
        for (std::size_t l = n; l-- > 0;) {
            g.w[l].noalias() = delta * cache.a[l].transpose();
            g.b[l] = delta.rowwise().sum();
            Mat prev = w[l].transpose() * delta;
            if (l > 0) {
                prev.array() *= (cache.a[l].array() > T(0)).template cast<T>();
            }
            delta = std::move(prev);
        }
        return delta;
    }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < w.size(); ++l) n += static_cast<std::size_t>(w[l].size() + b[l].size());
        return n;
    }

    /// Layer by layer: W (column-major) then b.
    [[nodiscard]] std::vector<double> flatten() const {
        std::vector<double> p;
        p.reserve(parameter_count());
        for (std::size_t l = 0; l < w.size(); ++l) {
            for (Eigen::Index i = 0; i < w[l].size(); ++i) p.push_back(static_cast<double>(w[l].data()[i]));
            for (Eigen::Index i = 0; i < b[l].size(); ++i) p.push_back(static_cast<double>(b[l].data()[i]));
        }
        return p;
    }

    void unflatten(const std::vector<double>& p) {
        if (p.size() != parameter_count()) {
            throw std::invalid_argument("parameter vector size does not match the network");
        }
        std::size_t k = 0;
        for (std::size_t l = 0; l < w.size(); ++l) {
            for (Eigen::Index i = 0; i < w[l].size(); ++i) w[l].data()[i] = static_cast<T>(p[k++]);
            for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l].data()[i] = static_cast<T>(p[k++]);
        }
    }

    static std::vector<double> flatten(const Grads& g) {
        std::vector<double> p;
        for (std::size_t l = 0; l < g.w.size(); ++l) {
            for (Eigen::Index i = 0; i < g.w[l].size(); ++i) p.push_back(static_cast<double>(g.w[l].data()[i]));
            for (Eigen::Index i = 0; i < g.b[l].size(); ++i) p.push_back(static_cast<double>(g.b[l].data()[i]));
        }
        return p;
    }

    template <class U>
    [[nodiscard]] Mlp<U> cast() const {
        Mlp<U> m(sizes_, out_);
        for (std::size_t l = 0; l < w.size(); ++l) {
            m.w[l] = w[l].template cast<U>();
            m.b[l] = b[l].template cast<U>();
        }
        return m;
    }

    [[nodiscard]] bool finite() const {
        for (std::size_t l = 0; l < w.size(); ++l) {
            if (!w[l].allFinite() || !b[l].allFinite()) return false;
        }
        return true;
    }

    std::vector<Mat> w;
    std::vector<Vec> b;

private:
    void activate(Mat& z, std::size_t l) const {
        if (l + 1 < w.size()) {
            z = z.cwiseMax(T(0));
        } else if (out_ == OutputActivation::tanh) {
            z = z.array().tanh().matrix();
        }
    }

    std::vector<std::size_t> sizes_;
    OutputActivation out_ = OutputActivation::identity;
};

template <class T>
class Adam {
public:
    Adam() = default;
    Adam(const Mlp<T>& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (std::size_t l = 0; l < net.layers(); ++l) {
            mw_.push_back(Mlp<T>::Mat::Zero(net.w[l].rows(), net.w[l].cols()));
            vw_.push_back(mw_.back());
            mb_.push_back(Mlp<T>::Vec::Zero(net.b[l].size()));
            vb_.push_back(mb_.back());
        }
    }

    void step(Mlp<T>& net, const typename Mlp<T>::Grads& g) {
        ++t_;
        const T b1 = static_cast<T>(beta1_);
        const T b2 = static_cast<T>(beta2_);
        const T c1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
        const T c2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
        const T lr = static_cast<T>(lr_);
        const T eps = static_cast<T>(eps_);
        for (std::size_t l = 0; l < net.layers(); ++l) {
            update(net.w[l], g.w[l], mw_[l], vw_[l], b1, b2, c1, c2, lr, eps);
            update(net.b[l], g.b[l], mb_[l], vb_[l], b1, b2, c1, c2, lr, eps);
        }
    }

    [[nodiscard]] long steps() const { return t_; }

private:
    template <class M>
    static void update(M& p, const M& g, M& m, M& v, T b1, T b2, T c1, T c2, T lr, T eps) {
        m = b1 * m + (T(1) - b1) * g;
        v.array() = b2 * v.array() + (T(1) - b2) * g.array().square();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }

    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    std::vector<typename Mlp<T>::Mat> mw_;
    std::vector<typename Mlp<T>::Mat> vw_;
    std::vector<typename Mlp<T>::Vec> mb_;
    std::vector<typename Mlp<T>::Vec> vb_;
};

/// target <- tau * online + (1 - tau) * target
template <class T>
void soft_update(Mlp<T>& target, const Mlp<T>& online, double tau) {
    const T t = static_cast<T>(tau);
    for (std::size_t l = 0; l < online.layers(); ++l) {
        target.w[l] = t * online.w[l] + (T(1) - t) * target.w[l];
        target.b[l] = t * online.b[l] + (T(1) - t) * target.b[l];
    }
}

}  // namespace autoenv::rl
