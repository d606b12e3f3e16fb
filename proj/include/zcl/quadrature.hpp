#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "zcl/error.hpp"

namespace zcl {

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    std::size_t subdivisions = 0;
};

/// Adaptive Simpson quadrature of f over [a, b].
///
/// The interval is first cut into `initial_panels` equal panels to get a
/// global magnitude estimate; each panel then receives a share of the absolute
/// budget rel_tol * |estimate| proportional to its width and is bisected until
/// the Richardson criterion |S2 - S1| <= 15 eps holds. Throws NumericError
/// carrying the achieved relative tolerance when more than `max_subdivisions`
/// bisections would be needed. `abs_tol` is a floor on the absolute budget for
/// integrands that are numerically zero.
template <typename F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, double rel_tol = 1e-8,
                                  std::size_t max_subdivisions = 1'000'000, double abs_tol = 0.0,
                                  std::size_t initial_panels = 64) {
    QuadratureResult out;
    if (a == b) return out;

    struct Segment {
        double a, b, fa, fm, fb, whole, eps;
        int depth;
    };

    const double h0 = (b - a) / static_cast<double>(initial_panels);
    std::vector<Segment> stack;
    stack.reserve(initial_panels + 128);
    double estimate = 0.0;
    double f_left = f(a);
    for (std::size_t i = 0; i < initial_panels; ++i) {
        const double lo = a + h0 * static_cast<double>(i);
        const double hi = (i + 1 == initial_panels) ? b : lo + h0;
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        const double fr = f(hi);
        const double s = (hi - lo) / 6.0 * (f_left + 4.0 * fm + fr);
        estimate += s;
        stack.push_back({lo, hi, f_left, fm, fr, s, 0.0, 0});
        f_left = fr;
    }
    const double budget = std::max(rel_tol * std::abs(estimate), abs_tol);
    for (auto& seg : stack) seg.eps = budget * (seg.b - seg.a) / (b - a);

    constexpr int kMaxDepth = 60;
    while (!stack.empty()) {
        Segment s = stack.back();
        stack.pop_back();
        const double m = 0.5 * (s.a + s.b);
        const double lm = 0.5 * (s.a + m);
        const double rm = 0.5 * (m + s.b);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = (m - s.a) / 6.0 * (s.fa + 4.0 * flm + s.fm);
        const double right = (s.b - m) / 6.0 * (s.fm + 4.0 * frm + s.fb);
        const double refined = left + right;
        const double delta = refined - s.whole;
        if (std::abs(delta) <= 15.0 * s.eps || s.depth >= kMaxDepth) {
            out.value += refined + delta / 15.0;
            out.error_estimate += std::abs(delta) / 15.0;
            continue;
        }
        if (++out.subdivisions > max_subdivisions) {
            double pending = std::abs(delta) / 15.0;
            for (const auto& rest : stack) pending += 15.0 * rest.eps;
            const double achieved = (out.error_estimate + pending) / std::max(std::abs(estimate), 1e-300);
            throw NumericError("adaptive quadrature did not converge; achieved relative tolerance " +
                                   std::to_string(achieved),
                               achieved);
        }
        stack.push_back({s.a, m, s.fa, flm, s.fm, left, 0.5 * s.eps, s.depth + 1});
        stack.push_back({m, s.b, s.fm, frm, s.fb, right, 0.5 * s.eps, s.depth + 1});
    }
    return out;
}

}  // namespace zcl
