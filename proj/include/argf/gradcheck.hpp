#pragma once

#include <functional>
#include <string>
#include <vector>

#include "argf/tensor.hpp"

namespace argf {

struct GradCheck {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;  // scalar entries compared
  bool pass = false;
};

/// Compares one analytic backward pass against central finite differences,
/// perturbing every element of every listed parameter. `loss_fn` must
/// rebuild the forward pass from the parameters' current values on each
/// call. Returns the worst relative error, |fd - g| / max(|fd|, |g|, 1e-3);
/// the floor keeps finite-difference noise on near-zero gradients from
/// registering as error.
double fd_max_rel_err(const std::function<Tensor()>& loss_fn, const std::vector<Tensor>& params,
                      double eps = 1e-5);

/// Every gradient suite in the project: each dense-layer kind, the
/// embedding-stage modules and losses, the GFN blocks and the fusion
/// strategies, all on small random shapes.
std::vector<GradCheck> gradcheck_all(double eps = 1e-5, double tol = 1e-4);

std::string gradcheck_table(const std::vector<GradCheck>& checks);
bool gradcheck_passed(const std::vector<GradCheck>& checks);

}  // namespace argf
