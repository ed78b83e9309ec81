#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lped/checkpoint.hpp"
#include "lped/models.hpp"

namespace lped {

// Adam with bias correction. Parameters whose gradient is empty for a step
// are left untouched (their moments do not advance either).
class Adam {
 public:
  Adam(std::vector<models::NamedVar> params, double lr, double beta1,
       double beta2, double eps);

  void step();
  void zero_grad();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::int64_t steps() const { return t_; }

  // Moments under "<prefix>/<param name>/m|v", step count in meta.
  void store(ckpt::Checkpoint& checkpoint, const std::string& prefix) const;
  void restore(const ckpt::Checkpoint& checkpoint, const std::string& prefix);

 private:
  std::vector<models::NamedVar> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::int64_t t_ = 0;
};

}  // namespace lped
