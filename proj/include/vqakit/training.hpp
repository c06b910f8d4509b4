#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vqakit/error.hpp"
#include "vqakit/toynet.hpp"

namespace vqakit {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;           // trainable entries compared
  std::vector<std::string> absent;   // frozen parameters, not checked
};

namespace detail {

inline double finite_or_throw(double v, const char* where) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFiniteLoss,
                std::string("loss is not finite ") + where);
  }
  return v;
}

}  // namespace detail

/// Compares analytic gradients of every trainable parameter with central
/// differences (f(θ+ε) − f(θ−ε)) / 2ε. The relative error of one entry is
/// |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
///
/// `loss` evaluates the objective at the current parameter values;
/// `compute_grads` fills the grad tensors of the trainable parameters.
/// Parameter values are restored exactly after each probe.
inline GradCheckReport grad_check(std::span<Parameter* const> params,
                                  const std::function<double()>& loss,
                                  const std::function<void()>& compute_grads,
                                  double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw Error(ErrorCode::kInvalidParam, "finite-difference step must be > 0");
  }
  detail::finite_or_throw(loss(), "at the evaluation point");
  compute_grads();

  GradCheckReport report;
  for (Parameter* p : params) {
    if (!p->trainable) {
      report.absent.push_back(p->name);
      continue;
    }
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = detail::finite_or_throw(loss(), "at θ+ε");
      p->value[i] = saved - eps;
      const double down = detail::finite_or_throw(loss(), "at θ−ε");
      p->value[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (report.checked == 0 || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p->name;
      }
      ++report.checked;
    }
  }
  return report;
}

inline GradCheckReport grad_check(ToyModel& model, const ToyBatch& batch,
                                  double eps = 1e-5) {
  const auto params = model.parameters();
  return grad_check(
      params, [&] { return model.loss(batch); },
      [&] { model.loss_and_grad(batch); }, eps);
}

struct FitReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> history;     // loss before step 1, …, after last step
  std::size_t decreasing_steps = 0;
  std::size_t trainable_changed = 0;  // entries whose bits changed
  std::size_t frozen_changed = 0;

  double decrease_fraction() const {
    const std::size_t steps = history.empty() ? 0 : history.size() - 1;
    return steps == 0 ? 0.0
                      : static_cast<double>(decreasing_steps) /
                            static_cast<double>(steps);
  }
};

namespace detail {

inline std::size_t changed_entries(const Tensor& before, const Tensor& after) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (std::memcmp(&before.data()[i], &after.data()[i], sizeof(double)) != 0) {
      ++n;
    }
  }
  return n;
}

}  // namespace detail

/// Plain gradient descent on the mean-squared error. Only trainable
/// parameters are updated; the report counts how many entries of each kind
/// changed bitwise, which for frozen storage must be zero.
inline FitReport fit_toy(ToyModel& model, const ToyBatch& batch,
                         std::size_t steps, double lr) {
  if (steps == 0) throw Error(ErrorCode::kInvalidParam, "steps must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw Error(ErrorCode::kInvalidParam, "learning rate must be >= 0");
  }
  const auto params = model.parameters();
  std::vector<Tensor> snapshot;
  snapshot.reserve(params.size());
  for (const Parameter* p : params) snapshot.push_back(p->value);

  FitReport report;
  for (std::size_t step = 0; step < steps; ++step) {
    const double l =
        detail::finite_or_throw(model.loss_and_grad(batch), "during training");
    report.history.push_back(l);
    for (Parameter* p : params) {
      if (!p->trainable) continue;
      auto value = p->value.data();
      const auto grad = p->grad.data();
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * grad[i];
    }
  }
  report.history.push_back(
      detail::finite_or_throw(model.loss(batch), "after training"));
  report.initial_loss = report.history.front();
  report.final_loss = report.history.back();
  for (std::size_t i = 1; i < report.history.size(); ++i) {
    if (report.history[i] < report.history[i - 1]) ++report.decreasing_steps;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = detail::changed_entries(snapshot[i], params[i]->value);
    (params[i]->trainable ? report.trainable_changed : report.frozen_changed) +=
        n;
  }
  return report;
}

}  // namespace vqakit
