#include "lped/optim.hpp"

#include <cmath>

namespace lped {

Adam::Adam(std::vector<models::NamedVar> params, double lr, double beta1,
           double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, var] : params_) {
    m_.emplace_back(var.shape(), 0.0);
    v_.emplace_back(var.shape(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Var p = params_[k].second;
    const Tensor& g = p.grad();
    if (g.empty()) continue;
    Tensor& value = p.mutable_value();
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, var] : params_) var.zero_grad();
}

void Adam::store(ckpt::Checkpoint& checkpoint, const std::string& prefix) const {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    checkpoint.put(prefix + "/" + params_[k].first + "/m", m_[k]);
    checkpoint.put(prefix + "/" + params_[k].first + "/v", v_[k]);
  }
  checkpoint.meta["optimizers"][prefix] = {{"steps", t_}, {"lr", lr_}};
}

void Adam::restore(const ckpt::Checkpoint& checkpoint, const std::string& prefix) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    m_[k] = checkpoint.get(prefix + "/" + params_[k].first + "/m");
    v_[k] = checkpoint.get(prefix + "/" + params_[k].first + "/v");
  }
  t_ = checkpoint.meta.at("optimizers").at(prefix).at("steps").get<std::int64_t>();
}

}  // namespace lped
