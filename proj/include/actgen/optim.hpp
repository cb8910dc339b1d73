#pragma once

#include <vector>

#include "actgen/autograd.hpp"

namespace actgen {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 1.0;  // <= 0 disables clipping
};

class Adam {
 public:
  Adam(std::vector<ag::Parameter*> params, AdamConfig config);

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Returns the pre-clipping global gradient norm.
  double step();
  void zero_grad();

  AdamConfig& config() { return config_; }
  long steps() const { return t_; }

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<ag::Matrix> m_;
  std::vector<ag::Matrix> v_;
  AdamConfig config_;
  long t_ = 0;
};

}  // namespace actgen
