#include "vigen/gradcheck.hpp"

#include <cmath>
#include <ostream>

#include "vigen/merge.hpp"
#include "vigen/ops.hpp"
#include "vigen/rng.hpp"
#include "vigen/warp.hpp"

namespace vigen {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, float lo = -1.0f, float hi = 1.0f) {
    std::vector<float> data(static_cast<size_t>(numel_of(shape)));
    for (float& v : data) v = static_cast<float>(rng.uniform(lo, hi));
    return Tensor::from_data(std::move(shape), std::move(data));
}

// Fixed-weight scalarization; plain means can hide sign errors that cancel.
Tensor probe_loss(const Tensor& y, uint64_t probe_seed) {
    Rng rng(probe_seed);
    Tensor probe = random_tensor(rng, y.shape());
    return reduce_sum(mul(y, probe));
}

}  // namespace

Tensor finite_difference_gradient(const std::function<double(Tensor&)>& f, Tensor& x, double h) {
    detail::check(h > 0.0, "finite_difference_gradient: step must be positive");
    auto xv = x.values();
    std::vector<float> g(xv.size());
    for (size_t i = 0; i < xv.size(); ++i) {
        const float old = xv[i];
        const float xp = static_cast<float>(static_cast<double>(old) + h);
        const float xm = static_cast<float>(static_cast<double>(old) - h);
        xv[i] = xp;
        const double fp = f(x);
        xv[i] = xm;
        const double fm = f(x);
        xv[i] = old;
        g[i] = static_cast<float>((fp - fm) /
                                  (static_cast<double>(xp) - static_cast<double>(xm)));
    }
    return Tensor::from_data(x.shape(), std::move(g));
}

double max_rel_error(std::span<const float> analytic, std::span<const float> numeric) {
    detail::check(analytic.size() == numeric.size(), "max_rel_error: length mismatch");
    double worst = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i], b = numeric[i];
        const double denom = std::max({1.0, std::abs(a), std::abs(b)});
        worst = std::max(worst, std::abs(a - b) / denom);
    }
    return worst;
}

double check_gradient_wrt(const std::function<Tensor()>& forward, Tensor& x, double h) {
    x.set_requires_grad(true);
    x.zero_grad();
    std::vector<float> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = forward();
        backward(loss);
        auto g = x.grad();
        analytic.assign(g.begin(), g.end());
    }
    Tensor fd = finite_difference_gradient(
        [&](Tensor&) { return static_cast<double>(forward().item()); }, x, h);
    x.set_requires_grad(false);
    x.zero_grad();
    return max_rel_error(analytic, fd.values());
}

namespace {

constexpr int kSeedsPerOp = 5;
constexpr double kTolerance = 1e-3;

double max_over_seeds(const std::function<double(uint64_t)>& one_seed) {
    double worst = 0.0;
    for (uint64_t s = 0; s < kSeedsPerOp; ++s) worst = std::max(worst, one_seed(s));
    return worst;
}

// Affine parameters whose sample points all stay > 0.01 px away from integer
// pixel coordinates, so neither the analytic subgradient convention nor the
// finite-difference step straddles a tent-kernel kink.
Tensor kink_safe_params(Rng& rng, int height, int width) {
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<float> p = {1.0f + static_cast<float>(rng.uniform(-0.08, 0.08)),
                                static_cast<float>(rng.uniform(-0.08, 0.08)),
                                static_cast<float>(rng.uniform(-0.3, 0.3)),
                                static_cast<float>(rng.uniform(-0.08, 0.08)),
                                1.0f + static_cast<float>(rng.uniform(-0.08, 0.08)),
                                static_cast<float>(rng.uniform(-0.3, 0.3))};
        bool safe = true;
        for (int r = 0; r < height && safe; ++r) {
            for (int c = 0; c < width && safe; ++c) {
                const double x = width > 1 ? 2.0 * c / (width - 1) - 1.0 : 0.0;
                const double y = height > 1 ? 2.0 * r / (height - 1) - 1.0 : 0.0;
                const double gx = p[0] * x + p[1] * y + p[2];
                const double gy = p[3] * x + p[4] * y + p[5];
                const double px = (gx + 1.0) / 2.0 * (width - 1);
                const double py = (gy + 1.0) / 2.0 * (height - 1);
                if (std::abs(px - std::round(px)) < 0.01 ||
                    std::abs(py - std::round(py)) < 0.01)
                    safe = false;
            }
        }
        if (safe) return Tensor::from_data({6}, std::move(p));
    }
    detail::fail("kink_safe_params: could not find a safe transform");
}

// Grid with fractional pixel parts in [0.1, 0.9]; a few points pushed out of
// bounds to cover the zero-padding region.
Tensor kink_safe_grid(Rng& rng, int height, int width) {
    std::vector<float> coords(static_cast<size_t>(height) * width * 2);
    size_t i = 0;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double px = rng.uniform_index(static_cast<uint64_t>(width - 1)) +
                        rng.uniform(0.1, 0.9);
            double py = rng.uniform_index(static_cast<uint64_t>(height - 1)) +
                        rng.uniform(0.1, 0.9);
            if (rng.uniform() < 0.1) px = -2.5 - rng.uniform();
            if (rng.uniform() < 0.1) py = static_cast<double>(height) + 1.5 + rng.uniform();
            coords[i++] = static_cast<float>(2.0 * px / (width - 1) - 1.0);
            coords[i++] = static_cast<float>(2.0 * py / (height - 1) - 1.0);
        }
    }
    return Tensor::from_data({height, width, 2}, std::move(coords));
}

}  // namespace

std::vector<GradCheck> gradient_suite() {
    std::vector<GradCheck> suite;

    suite.push_back({"conv2d/input", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(101, s));
                             Tensor x = random_tensor(rng, {1, 2, 5, 5});
                             Tensor k = random_tensor(rng, {3, 2, 3, 3});
                             Tensor b = random_tensor(rng, {3});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(conv2d(x, k, b, 2, 1), s + 7); }, x);
                         });
                     }});
    suite.push_back({"conv2d/kernel", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(102, s));
                             Tensor x = random_tensor(rng, {2, 2, 5, 5});
                             Tensor k = random_tensor(rng, {3, 2, 3, 3});
                             Tensor b = random_tensor(rng, {3});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(conv2d(x, k, b, 1, 1), s + 7); }, k);
                         });
                     }});
    suite.push_back({"conv2d/bias", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(103, s));
                             Tensor x = random_tensor(rng, {1, 2, 4, 4});
                             Tensor k = random_tensor(rng, {2, 2, 3, 3});
                             Tensor b = random_tensor(rng, {2});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(conv2d(x, k, b, 1, 0), s + 7); }, b);
                         });
                     }});
    suite.push_back({"transposed_conv2d/input", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(104, s));
                             Tensor x = random_tensor(rng, {1, 2, 3, 3});
                             Tensor k = random_tensor(rng, {2, 3, 4, 4});
                             Tensor b = random_tensor(rng, {3});
                             return check_gradient_wrt(
                                 [&] {
                                     return probe_loss(transposed_conv2d(x, k, b, 2, 1), s + 7);
                                 },
                                 x);
                         });
                     }});
    suite.push_back({"transposed_conv2d/kernel", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(105, s));
                             Tensor x = random_tensor(rng, {2, 2, 3, 3});
                             Tensor k = random_tensor(rng, {2, 3, 4, 4});
                             Tensor b = random_tensor(rng, {3});
                             return check_gradient_wrt(
                                 [&] {
                                     return probe_loss(transposed_conv2d(x, k, b, 2, 1), s + 7);
                                 },
                                 k);
                         });
                     }});
    suite.push_back({"transposed_conv2d/bias", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(106, s));
                             Tensor x = random_tensor(rng, {1, 2, 3, 3});
                             Tensor k = random_tensor(rng, {2, 2, 3, 3});
                             Tensor b = random_tensor(rng, {2});
                             return check_gradient_wrt(
                                 [&] {
                                     return probe_loss(transposed_conv2d(x, k, b, 1, 0), s + 7);
                                 },
                                 b);
                         });
                     }});
    suite.push_back({"dense/input", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(107, s));
                             Tensor x = random_tensor(rng, {3, 4});
                             Tensor w = random_tensor(rng, {5, 4});
                             Tensor b = random_tensor(rng, {5});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(dense(x, w, b), s + 7); }, x);
                         });
                     }});
    suite.push_back({"dense/weight", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(108, s));
                             Tensor x = random_tensor(rng, {3, 4});
                             Tensor w = random_tensor(rng, {5, 4});
                             Tensor b = random_tensor(rng, {5});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(dense(x, w, b), s + 7); }, w);
                         });
                     }});
    suite.push_back({"dense/bias", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(109, s));
                             Tensor x = random_tensor(rng, {3, 4});
                             Tensor w = random_tensor(rng, {5, 4});
                             Tensor b = random_tensor(rng, {5});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(dense(x, w, b), s + 7); }, b);
                         });
                     }});
    suite.push_back({"leaky_relu", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(110, s));
                             // keep inputs away from the kink at 0
                             Tensor x = random_tensor(rng, {2, 3, 4});
                             for (float& v : x.values())
                                 if (std::abs(v) < 0.05f) v = v < 0 ? -0.05f : 0.05f;
                             return check_gradient_wrt(
                                 [&] { return probe_loss(leaky_relu(x, 0.2f), s + 7); }, x);
                         });
                     }});
    suite.push_back({"tanh", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(111, s));
                             Tensor x = random_tensor(rng, {3, 7}, -2.0f, 2.0f);
                             return check_gradient_wrt(
                                 [&] { return probe_loss(tanh_act(x), s + 7); }, x);
                         });
                     }});
    suite.push_back({"sigmoid", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(112, s));
                             Tensor x = random_tensor(rng, {3, 7}, -2.0f, 2.0f);
                             return check_gradient_wrt(
                                 [&] { return probe_loss(sigmoid(x), s + 7); }, x);
                         });
                     }});
    suite.push_back({"softmax_channels", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(113, s));
                             Tensor x = random_tensor(rng, {1, 4, 3, 3}, -2.0f, 2.0f);
                             return check_gradient_wrt(
                                 [&] { return probe_loss(softmax_channels(x), s + 7); }, x);
                         });
                     }});
    suite.push_back({"add", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(114, s));
                             Tensor a = random_tensor(rng, {2, 5});
                             Tensor b = random_tensor(rng, {2, 5});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(add(a, b), s + 7); }, a);
                         });
                     }});
    suite.push_back({"sub", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(115, s));
                             Tensor a = random_tensor(rng, {2, 5});
                             Tensor b = random_tensor(rng, {2, 5});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(sub(a, b), s + 7); }, b);
                         });
                     }});
    suite.push_back({"mul", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(116, s));
                             Tensor a = random_tensor(rng, {2, 5});
                             Tensor b = random_tensor(rng, {2, 5});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(mul(a, b), s + 7); }, a);
                         });
                     }});
    suite.push_back({"scale", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(117, s));
                             Tensor a = random_tensor(rng, {2, 5});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(scale(a, -1.7f), s + 7); }, a);
                         });
                     }});
    suite.push_back({"concat_channels", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(118, s));
                             Tensor a = random_tensor(rng, {1, 2, 3, 3});
                             Tensor b = random_tensor(rng, {1, 3, 3, 3});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(concat_channels({a, b}), s + 7); }, b);
                         });
                     }});
    suite.push_back({"reduce_mean", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(119, s));
                             Tensor x = random_tensor(rng, {7});
                             return check_gradient_wrt([&] { return reduce_mean(x); }, x);
                         });
                     }});
    suite.push_back({"reshape", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(120, s));
                             Tensor x = random_tensor(rng, {2, 6});
                             return check_gradient_wrt(
                                 [&] { return probe_loss(reshape(x, {3, 4}), s + 7); }, x);
                         });
                     }});
    suite.push_back({"affine_grid/params", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(121, s));
                             Tensor p = kink_safe_params(rng, 7, 7);
                             return check_gradient_wrt(
                                 [&] { return probe_loss(affine_grid(p, 7, 7), s + 7); }, p);
                         });
                     }});
    suite.push_back({"bilinear_sample/image", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(122, s));
                             Tensor img = random_tensor(rng, {2, 6, 6}, 0.0f, 1.0f);
                             Tensor grid = kink_safe_grid(rng, 6, 6);
                             return check_gradient_wrt(
                                 [&] {
                                     return probe_loss(bilinear_sample(img, SampleGrid{grid}),
                                                       s + 7);
                                 },
                                 img);
                         });
                     }});
    suite.push_back({"bilinear_sample/grid", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(123, s));
                             Tensor img = random_tensor(rng, {2, 6, 6}, 0.0f, 1.0f);
                             Tensor grid = kink_safe_grid(rng, 6, 6);
                             return check_gradient_wrt(
                                 [&] {
                                     return probe_loss(bilinear_sample(img, SampleGrid{grid}),
                                                       s + 7);
                                 },
                                 grid);
                         });
                     }});
    suite.push_back({"warp_image/params", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(124, s));
                             Tensor img = random_tensor(rng, {1, 8, 8}, 0.0f, 1.0f);
                             Tensor p = kink_safe_params(rng, 8, 8);
                             return check_gradient_wrt(
                                 [&] { return probe_loss(warp_image(img, p), s + 7); }, p);
                         });
                     }});
    suite.push_back({"merge_masked/images", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(125, s));
                             Tensor warped = random_tensor(rng, {1, 3, 2, 4, 4});
                             Tensor masks = random_tensor(rng, {1, 3, 4, 4}, 0.0f, 1.0f);
                             return check_gradient_wrt(
                                 [&] {
                                     return probe_loss(merge_masked_multi(warped, masks), s + 7);
                                 },
                                 warped);
                         });
                     }});
    suite.push_back({"merge_masked/masks", [] {
                         return max_over_seeds([](uint64_t s) {
                             Rng rng(mix_seed(126, s));
                             Tensor warped = random_tensor(rng, {1, 3, 2, 4, 4});
                             Tensor masks = random_tensor(rng, {1, 3, 4, 4}, 0.0f, 1.0f);
                             return check_gradient_wrt(
                                 [&] {
                                     return probe_loss(merge_masked_multi(warped, masks), s + 7);
                                 },
                                 masks);
                         });
                     }});
    suite.push_back(
        {"composite/conv-act-dense", [] {
             return max_over_seeds([](uint64_t s) {
                 Rng rng(mix_seed(127, s));
                 Tensor x = random_tensor(rng, {1, 1, 8, 8});
                 Tensor k = random_tensor(rng, {2, 1, 3, 3});
                 Tensor kb = random_tensor(rng, {2});
                 Tensor w = random_tensor(rng, {3, 32}, -0.5f, 0.5f);
                 Tensor wb = random_tensor(rng, {3});
                 auto forward = [&] {
                     Tensor h = leaky_relu(conv2d(x, k, kb, 2, 1), 0.2f);
                     Tensor flat = reshape(h, {1, 32});
                     return probe_loss(tanh_act(dense(flat, w, wb)), s + 7);
                 };
                 double worst = check_gradient_wrt(forward, k);
                 worst = std::max(worst, check_gradient_wrt(forward, w));
                 worst = std::max(worst, check_gradient_wrt(forward, x));
                 return worst;
             });
         }});

    return suite;
}

bool run_gradient_suite(std::ostream& os, const std::string& corrupt_op) {
    bool all_ok = true;
    for (const auto& chk : gradient_suite()) {
        double err = chk.run();
        if (chk.name == corrupt_op) err += 1.0;
        const bool ok = err < kTolerance;
        all_ok = all_ok && ok;
        os << (ok ? "[ok]   " : "[FAIL] ") << chk.name << "  max_rel_err=" << err << "\n";
    }
    return all_ok;
}

}  // namespace vigen
