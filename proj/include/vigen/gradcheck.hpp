#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vigen/tensor.hpp"

namespace vigen {

// Central differences (f(x+h*e_i) - f(x-h*e_i)) / (2h), with the differencing
// and the division carried out in double precision and the step corrected for
// float32 rounding of x +- h. f must be deterministic and must not depend on
// tape state; x is perturbed in place and restored.
Tensor finite_difference_gradient(const std::function<double(Tensor&)>& f, Tensor& x,
                                  double h = 1e-3);

// Max elementwise deviation |a-b| / max(1, |a|, |b|). The unit floor turns the
// metric into an absolute bound for gradients below 1, which is what keeps
// finite-difference truncation noise on near-zero entries from dominating.
double max_rel_error(std::span<const float> analytic, std::span<const float> numeric);

// One registered gradient check: runs a forward/backward pass for an op,
// compares against finite differences, returns the max relative error.
struct GradCheck {
    std::string name;
    std::function<double()> run;
};

// Every differentiable op in the library, the warp grid/sampler (w.r.t. all
// their inputs), the mask merge, and a composite encoder-style graph.
std::vector<GradCheck> gradient_suite();

// Runs the suite, printing one line per op. `corrupt_op`, when non-empty,
// perturbs that op's analytic gradient before comparison (negative-control
// fixture for tests). Returns true iff every max relative error < 1e-3.
bool run_gradient_suite(std::ostream& os, const std::string& corrupt_op = "");

// Helper for single-input checks: computes analytic grad of f w.r.t. x via
// the tape and compares with finite differences.
double check_gradient_wrt(const std::function<Tensor()>& forward, Tensor& x, double h = 1e-3);

}  // namespace vigen
