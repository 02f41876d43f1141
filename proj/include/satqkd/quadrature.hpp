#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace satqkd {

/// Adaptive Gauss-Kronrod (G7/K15) quadrature on a finite interval.
/// Bisects intervals until the local K15-G7 error estimate meets the
/// requested tolerance, distributing the absolute budget by width.
class Quadrature {
public:
    struct Options {
        double rel_tol = 1e-6;
        double abs_tol = 0.0;
        int max_depth = 28;
    };

    template <class F>
    static double integrate(F&& f, double lo, double hi, Options opt = {}) {
        if (!(lo <= hi)) throw std::invalid_argument("quadrature: inverted interval");
        if (lo == hi) return 0.0;
        auto [whole, err] = kronrod(f, lo, hi);
        double tol = std::max(opt.abs_tol, std::abs(whole) * opt.rel_tol);
        double bad = 0.0;
        double v = refine(f, lo, hi, whole, err, tol, opt.max_depth, bad);
        if (bad > std::max(tol, 1e-14) * 32.0)
            throw std::runtime_error("quadrature failed to converge: residual error " +
                                     std::to_string(bad) + " over [" + std::to_string(lo) +
                                     ", " + std::to_string(hi) + "]");
        return v;
    }

private:
    template <class F>
    static double refine(F& f, double lo, double hi, double whole, double err,
                         double tol, int depth, double& bad) {
        if (err <= tol || hi - lo < 1e-15 * (std::abs(lo) + std::abs(hi)))
            return whole;
        if (depth <= 0) {
            bad += err;
            return whole;
        }
        double mid = 0.5 * (lo + hi);
        auto [l, el] = kronrod(f, lo, mid);
        auto [r, er] = kronrod(f, mid, hi);
        return refine(f, lo, mid, l, el, 0.5 * tol, depth - 1, bad) +
               refine(f, mid, hi, r, er, 0.5 * tol, depth - 1, bad);
    }

    template <class F>
    static std::pair<double, double> kronrod(F& f, double lo, double hi) {
        // K15 abscissae (positive half) and weights; G7 weights on the shared nodes.
        static constexpr double xk[8] = {
            0.0, 0.2077849550078985, 0.4058451513773972, 0.5860872354676911,
            0.7415311855993945, 0.8648644233597691, 0.9491079123427585,
            0.9914553711208126};
        static constexpr double wk[8] = {
            0.2094821410847278, 0.2044329400752989, 0.1903505780647854,
            0.1690047266392679, 0.1406532597155259, 0.1047900103222502,
            0.06309209262997855, 0.02293532201052922};
        static constexpr double wg[4] = {
            0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
            0.1294849661688697};

        const double c = 0.5 * (lo + hi);
        const double h = 0.5 * (hi - lo);
        const double f0 = f(c);
        double ik = wk[0] * f0;
        double ig = wg[0] * f0;
        for (int i = 1; i < 8; ++i) {
            const double fp = f(c + h * xk[i]);
            const double fm = f(c - h * xk[i]);
            ik += wk[i] * (fp + fm);
            if (i % 2 == 0) ig += wg[i / 2] * (fp + fm);
        }
        ik *= h;
        ig *= h;
        return {ik, std::abs(ik - ig)};
    }
};

}  // namespace satqkd
