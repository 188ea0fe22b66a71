#include "caum/param_store.hpp"

#include <cmath>

namespace caum {

Tensor& ParamStore::add(const std::string& name, std::size_t rows, std::size_t cols,
                        Init init) {
    if (index_.count(name))
        throw ContractError("parameter '" + name + "' already registered");
    std::vector<double> values(rows * cols, 0.0);
    switch (init) {
        case Init::Zero:
            break;
        case Init::Glorot: {
            const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
            std::uniform_real_distribution<double> u(-bound, bound);
            for (double& v : values) v = u(rng_);
            break;
        }
        case Init::Normal01: {
            std::normal_distribution<double> g(0.0, 0.1);
            for (double& v : values) v = g(rng_);
            break;
        }
    }
    Tensor t = Tensor::from(rows, cols, std::move(values), true);
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(t);
    moments_.push_back({});
    return tensors_.back();
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return tensors_[it->second];
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return tensors_[it->second];
}

void ParamStore::zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
}

std::size_t ParamStore::adam_step(const AdamConfig& cfg) {
    ++adam_t_;
    std::size_t skipped = 0;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t_));
    for (std::size_t p = 0; p < tensors_.size(); ++p) {
        Tensor& t = tensors_[p];
        if (t.node()->grad.size() != t.size()) {
            ++skipped;
            continue;
        }
        Moments& mo = moments_[p];
        if (mo.m.size() != t.size()) {
            mo.m.assign(t.size(), 0.0);
            mo.v.assign(t.size(), 0.0);
        }
        const std::vector<double>& g = t.node()->grad;
        std::vector<double>& x = t.values();
        for (std::size_t i = 0; i < x.size(); ++i) {
            mo.m[i] = cfg.beta1 * mo.m[i] + (1.0 - cfg.beta1) * g[i];
            mo.v[i] = cfg.beta2 * mo.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = mo.m[i] / bc1;
            const double vhat = mo.v[i] / bc2;
            x[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
    ++revision_;
    return skipped;
}

std::size_t ParamStore::total_coords() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

} // namespace caum
