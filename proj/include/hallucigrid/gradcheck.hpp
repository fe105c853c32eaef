#pragma once
// Central-finite-difference verification of the analytic gradients on a tiny
// random instance. Runs at 64-bit precision with normalization off.

#include <cmath>
#include <string>
#include <vector>

#include "hallucigrid/loss.hpp"
#include "hallucigrid/net.hpp"

namespace hg {

struct GradCheckReport {
  bool passed = false;
  double max_relative_error = 0.0;
  size_t worst_param = 0;
  std::string worst_param_name;
  double analytic = 0.0;
  double numeric = 0.0;
  size_t param_count = 0;
};

namespace detail {

// Random instance shared by the analytic and numeric routes.
struct GradCheckProblem {
  Tensor4<double> input;
  Tensor4<double> target;
  Tensor4<uint8_t> valid;
};

inline GradCheckProblem make_gradcheck_problem(const NetConfig& cfg, int n, int h, int w,
                                               uint64_t seed) {
  GradCheckProblem p{Tensor4<double>(n, cfg.in_channels, h, w),
                     Tensor4<double>(n, 1, h, w), Tensor4<uint8_t>(n, 1, h, w, 0)};
  Rng rng(Rng::derive_seed(seed, "gradcheck-data"));
  for (auto& v : p.input.v) {
    const int s = static_cast<int>(rng.below(3));
    v = s == 0 ? 0.0 : (s == 1 ? 0.5 : 1.0);
  }
  for (auto& v : p.target.v) v = rng.below(2) ? 1.0 : 0.0;
  bool any = false;
  for (auto& v : p.valid.v) {
    v = rng.bernoulli(0.7);
    any |= v != 0;
  }
  if (!any) p.valid.v[0] = 1;
  return p;
}

inline double gradcheck_loss(const Network<double>& net, std::span<const double> params,
                             const GradCheckProblem& p) {
  std::vector<double> state = net.init_state();
  Tape<double> tape;
  net.forward(params, state, p.input, Mode::Train, tape);
  return masked_bce_from_logits(tape.logits(), p.target, p.valid);
}

}  // namespace detail

// Central differences of the scalar loss with respect to every parameter.
inline std::vector<double> finite_difference_gradient(const Network<double>& net,
                                                      std::vector<double> params,
                                                      const detail::GradCheckProblem& problem,
                                                      double h = 1e-5) {
  std::vector<double> fd(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = detail::gradcheck_loss(net, params, problem);
    params[i] = keep - h;
    const double down = detail::gradcheck_loss(net, params, problem);
    params[i] = keep;
    fd[i] = (up - down) / (2.0 * h);
  }
  return fd;
}

inline GradCheckReport compare_gradients(const Network<double>& net,
                                         std::span<const double> analytic,
                                         std::span<const double> numeric,
                                         double tolerance = 1e-4) {
  GradCheckReport rep;
  rep.param_count = analytic.size();
  for (size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], f = numeric[i];
    const double rel = std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-4});
    if (rel > rep.max_relative_error) {
      rep.max_relative_error = rel;
      rep.worst_param = i;
      rep.analytic = a;
      rep.numeric = f;
    }
  }
  rep.worst_param_name = net.param_name(rep.worst_param);
  rep.passed = rep.max_relative_error < tolerance;
  return rep;
}

// End-to-end check on a small random instance. Defaults match the tiny
// configuration used in the regression gate: depth 2, base 2, 8x8 input.
inline GradCheckReport grad_check(NetConfig config, uint64_t seed, int batch = 2,
                                  int height = 8, int width = 8, double fd_step = 1e-5,
                                  double tolerance = 1e-4) {
  config.norm = false;  // batch statistics would couple parameters across cells
  config.validate();
  Network<double> net(config);
  const auto problem = detail::make_gradcheck_problem(config, batch, height, width, seed);
  // randomized parameters keep the evaluation point off relu kinks, where the
  // central difference of the subgradient is ill-defined
  std::vector<double> params = net.random_params(Rng::derive_seed(seed, "gradcheck-params"));

  std::vector<double> state = net.init_state();
  Tape<double> tape;
  net.forward(params, state, problem.input, Mode::Train, tape);
  Tensor4<double> dlogits(tape.logits().n, tape.logits().c, tape.logits().h, tape.logits().w);
  masked_bce_logit_grad(tape.logits(), problem.target, problem.valid, 1.0, dlogits);
  std::vector<double> analytic(net.param_count(), 0.0);
  net.backward_from_logits(tape, params, dlogits, analytic);

  const std::vector<double> numeric = finite_difference_gradient(net, params, problem, fd_step);
  return compare_gradients(net, analytic, numeric, tolerance);
}

inline GradCheckReport grad_check(uint64_t seed) {
  NetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 2;
  cfg.skip_levels = 2;
  cfg.norm = false;
  return grad_check(cfg, seed);
}

}  // namespace hg
