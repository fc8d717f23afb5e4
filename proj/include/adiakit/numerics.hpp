#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "adiakit/types.hpp"

namespace adiakit {

// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
inline std::vector<std::pair<double, double>> gauss_legendre(int n) {
    std::vector<std::pair<double, double>> out(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        out[i] = {-x, w};
        out[n - 1 - i] = {x, w};
    }
    return out;
}

// Integrate f over [a, b] with a fixed composite Gauss-Legendre rule.
inline double gl_integrate(const std::function<double(double)>& f, double a, double b,
                           int panels, int nodes_per_panel = 15) {
    static thread_local std::vector<std::pair<double, double>> cache;
    static thread_local int cache_n = -1;
    if (cache_n != nodes_per_panel) {
        cache = gauss_legendre(nodes_per_panel);
        cache_n = nodes_per_panel;
    }
    double total = 0;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * h;
        double acc = 0;
        for (const auto& [x, w] : cache) acc += w * f(lo + 0.5 * h * (x + 1.0));
        total += acc * 0.5 * h;
    }
    return total;
}

// Golden-section search for a maximum of a unimodal function on [a, b].
inline double golden_section_max(const std::function<double(double)>& f, double a, double b,
                                 double xtol = 1e-8, double* arg = nullptr) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > xtol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    if (arg) *arg = (a + b) / 2;
    return std::max(f1, f2);
}

inline double golden_section_min(const std::function<double(double)>& f, double a, double b,
                                 double xtol = 1e-8, double* arg = nullptr) {
    double v = golden_section_max([&](double x) { return -f(x); }, a, b, xtol, arg);
    return -v;
}

// Largest singular value. Exact SVD for small matrices, power iteration on M^dag M
// for larger ones (deterministic start vector).
inline double spectral_norm(const Eigen::MatrixXcd& m, int power_iters = 80) {
    if (m.rows() <= 64) return m.jacobiSvd().singularValues()(0);
    Eigen::VectorXcd v = Eigen::VectorXcd::Ones(m.cols());
    for (int i = 0; i < m.cols(); ++i) v(i) += Complex(0.0, 1e-3 * ((i * 2654435761u) % 97) / 97.0);
    v.normalize();
    double s = 0;
    for (int it = 0; it < power_iters; ++it) {
        Eigen::VectorXcd w = m.adjoint() * (m * v);
        double nw = w.norm();
        if (nw == 0) return 0;
        v = w / nw;
        double snew = std::sqrt(nw);
        if (std::abs(snew - s) < 1e-13 * std::max(1.0, snew)) return snew;
        s = snew;
    }
    return s;
}

// Embedded Dormand-Prince 5(4) for the matrix ODE Y' = rhs(s, Y).
struct OdeOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double initial_step = 1e-3;
    double min_step = 1e-14;
    long long max_steps = 2'000'000;
};

struct OdeResult {
    Eigen::MatrixXcd y;
    long long steps = 0;
    long long rejected = 0;
};

inline OdeResult integrate_matrix_ode(
    const std::function<Eigen::MatrixXcd(double, const Eigen::MatrixXcd&)>& rhs,
    Eigen::MatrixXcd y0, double s0, double s1, const OdeOptions& opt = {}) {
    // Dormand-Prince coefficients
    static const double c2 = 1. / 5, c3 = 3. / 10, c4 = 4. / 5, c5 = 8. / 9;
    static const double a21 = 1. / 5;
    static const double a31 = 3. / 40, a32 = 9. / 40;
    static const double a41 = 44. / 45, a42 = -56. / 15, a43 = 32. / 9;
    static const double a51 = 19372. / 6561, a52 = -25360. / 2187, a53 = 64448. / 6561,
                        a54 = -212. / 729;
    static const double a61 = 9017. / 3168, a62 = -355. / 33, a63 = 46732. / 5247,
                        a64 = 49. / 176, a65 = -5103. / 18656;
    static const double b1 = 35. / 384, b3 = 500. / 1113, b4 = 125. / 192, b5 = -2187. / 6784,
                        b6 = 11. / 84;
    static const double e1 = 71. / 57600, e3 = -71. / 16695, e4 = 71. / 1920,
                        e5 = -17253. / 339200, e6 = 22. / 525, e7 = -1. / 40;

    OdeResult res;
    res.y = std::move(y0);
    double s = s0;
    const double dir = (s1 >= s0) ? 1.0 : -1.0;
    double h = dir * std::min(opt.initial_step, std::abs(s1 - s0));
    Eigen::MatrixXcd k1 = rhs(s, res.y);
    while (dir * (s1 - s) > 1e-16) {
        if (dir * (s + h - s1) > 0) h = s1 - s;
        const Eigen::MatrixXcd k2 = rhs(s + c2 * h, res.y + h * a21 * k1);
        const Eigen::MatrixXcd k3 = rhs(s + c3 * h, res.y + h * (a31 * k1 + a32 * k2));
        const Eigen::MatrixXcd k4 = rhs(s + c4 * h, res.y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Eigen::MatrixXcd k5 =
            rhs(s + c5 * h, res.y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Eigen::MatrixXcd k6 =
            rhs(s + h, res.y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Eigen::MatrixXcd ynew =
            res.y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Eigen::MatrixXcd k7 = rhs(s + h, ynew);
        const Eigen::MatrixXcd errm =
            h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double scale = opt.abs_tol + opt.rel_tol * std::max(res.y.norm(), ynew.norm());
        const double err = errm.norm() / scale;
        if (err <= 1.0) {
            s += h;
            res.y = ynew;
            k1 = k7;  // FSAL
            ++res.steps;
        } else {
            ++res.rejected;
        }
        const double fac = std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
        h *= fac;
        if (std::abs(h) < opt.min_step)
            throw NonConvergence("integrate_matrix_ode: step size underflow");
        if (res.steps + res.rejected > opt.max_steps)
            throw NonConvergence("integrate_matrix_ode: step budget exhausted");
    }
    return res;
}

inline std::uint64_t fnv1a(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Cubic spline with not-a-knot boundary conditions on a uniform grid.
class UniformCubicSpline {
public:
    UniformCubicSpline() = default;

    UniformCubicSpline(double a, double b, std::vector<double> values)
        : a_(a), h_((b - a) / (values.size() - 1)), y_(std::move(values)) {
        const int n = static_cast<int>(y_.size());
        if (n < 4) throw Error("UniformCubicSpline: need at least 4 points");
        // Second derivatives m_i with not-a-knot ends. On a uniform grid the
        // not-a-knot conditions m0 - 2m1 + m2 = 0 and its mirror pin
        // m1 = r1/6 and m_{n-2} = r_{n-2}/6 exactly, where
        // r_i = 6(y_{i-1} - 2y_i + y_{i+1})/h^2; the rest is tridiagonal.
        m_.assign(n, 0.0);
        auto r = [&](int i) { return 6.0 * (y_[i - 1] - 2.0 * y_[i] + y_[i + 1]) / (h_ * h_); };
        m_[1] = r(1) / 6.0;
        m_[n - 2] = r(n - 2) / 6.0;
        if (n == 5) {
            m_[2] = (r(2) - m_[1] - m_[3]) / 4.0;
        } else if (n > 5) {
            const int k = n - 4;  // unknowns m_2 .. m_{n-3}
            std::vector<double> diag(k, 4.0), rhs(k);
            for (int i = 0; i < k; ++i) rhs[i] = r(i + 2);
            rhs[0] -= m_[1];
            rhs[k - 1] -= m_[n - 2];
            for (int i = 1; i < k; ++i) {
                const double f = 1.0 / diag[i - 1];
                diag[i] -= f;
                rhs[i] -= f * rhs[i - 1];
            }
            m_[2 + k - 1] = rhs[k - 1] / diag[k - 1];
            for (int i = k - 2; i >= 0; --i) m_[2 + i] = (rhs[i] - m_[2 + i + 1]) / diag[i];
        }
        m_[0] = 2.0 * m_[1] - m_[2];
        m_[n - 1] = 2.0 * m_[n - 2] - m_[n - 3];
    }

    double eval(double x) const {
        const auto [i, t] = locate(x);
        const double yl = y_[i], yr = y_[i + 1], ml = m_[i], mr = m_[i + 1];
        const double u = 1.0 - t;
        return u * yl + t * yr +
               (h_ * h_ / 6.0) * ((u * u * u - u) * ml + (t * t * t - t) * mr);
    }

    double derivative(double x) const {
        const auto [i, t] = locate(x);
        const double yl = y_[i], yr = y_[i + 1], ml = m_[i], mr = m_[i + 1];
        const double u = 1.0 - t;
        return (yr - yl) / h_ +
               (h_ / 6.0) * (-(3.0 * u * u - 1.0) * ml + (3.0 * t * t - 1.0) * mr);
    }

private:
    std::pair<int, double> locate(double x) const {
        const int n = static_cast<int>(y_.size());
        double rel = (x - a_) / h_;
        int i = std::clamp(static_cast<int>(std::floor(rel)), 0, n - 2);
        return {i, rel - i};
    }

    double a_ = 0, h_ = 1;
    std::vector<double> y_, m_;
};

// Entry-wise spline interpolation of a matrix-valued function of s in [a, b].
class MatrixSpline {
public:
    MatrixSpline(const std::function<Eigen::MatrixXcd(double)>& fn, double a, double b, int nodes) {
        Eigen::MatrixXcd probe = fn(a);
        rows_ = probe.rows();
        cols_ = probe.cols();
        std::vector<std::vector<double>> re(rows_ * cols_), im(rows_ * cols_);
        for (auto& v : re) v.resize(nodes);
        for (auto& v : im) v.resize(nodes);
        for (int k = 0; k < nodes; ++k) {
            const double s = a + (b - a) * k / (nodes - 1);
            Eigen::MatrixXcd m = (k == 0) ? probe : fn(s);
            for (int j = 0; j < cols_; ++j)
                for (int i = 0; i < rows_; ++i) {
                    re[j * rows_ + i][k] = m(i, j).real();
                    im[j * rows_ + i][k] = m(i, j).imag();
                }
        }
        for (int e = 0; e < rows_ * cols_; ++e) {
            re_.emplace_back(a, b, std::move(re[e]));
            im_.emplace_back(a, b, std::move(im[e]));
        }
    }

    Eigen::MatrixXcd eval(double s) const {
        Eigen::MatrixXcd m(rows_, cols_);
        for (int j = 0; j < cols_; ++j)
            for (int i = 0; i < rows_; ++i) {
                const int e = j * rows_ + i;
                m(i, j) = Complex(re_[e].eval(s), im_[e].eval(s));
            }
        return m;
    }

    Eigen::MatrixXcd derivative(double s) const {
        Eigen::MatrixXcd m(rows_, cols_);
        for (int j = 0; j < cols_; ++j)
            for (int i = 0; i < rows_; ++i) {
                const int e = j * rows_ + i;
                m(i, j) = Complex(re_[e].derivative(s), im_[e].derivative(s));
            }
        return m;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::vector<UniformCubicSpline> re_, im_;
};

}  // namespace adiakit
