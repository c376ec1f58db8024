#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "polar6d/image.hpp"

namespace polar6d {

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into [0, pi).
inline double wrap_pi(double a) {
    a = std::fmod(a, kPi);
    if (a < 0.0) a += kPi;
    if (a >= kPi) a = 0.0;
    return a;
}

/// Wraps an angle into [0, 2*pi).
inline double wrap_2pi(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    if (a >= 2.0 * kPi) a = 0.0;
    return a;
}

/// Recovered per-pixel polarization state: unpolarized intensity,
/// degree of polarization and angle of polarization.
struct PolarSample {
    double i_un = 0.0;  // >= 0, linear radiometric units
    double dop = 0.0;   // in [0, 1]
    double aop = 0.0;   // radians, canonical range [0, pi)
};

/// Dielectric material, refractive index in the physically plausible range.
class Material {
public:
    explicit Material(double eta) : eta_(eta) {
        if (!(eta > 1.0 && eta <= 3.0))
            throw std::invalid_argument("Material: eta must be in (1, 3]");
    }
    double eta() const { return eta_; }

private:
    double eta_;
};

/// K >= 3 intensity images captured or synthesized at distinct polarizer angles.
struct FilterStack {
    std::vector<double> angles;          // polarizer angles, radians
    std::vector<Image<double>> images;   // one per angle, same dimensions
    int width = 0;
    int height = 0;

    void validate() const {
        if (angles.size() != images.size() || angles.size() < 3)
            throw std::invalid_argument("FilterStack: need K >= 3 angle/image pairs");
        for (size_t i = 0; i < angles.size(); ++i)
            for (size_t j = i + 1; j < angles.size(); ++j) {
                double d = std::abs(wrap_pi(angles[i]) - wrap_pi(angles[j]));
                d = std::min(d, kPi - d);
                if (d <= 1e-6)
                    throw std::invalid_argument("FilterStack: angles coincide mod pi");
            }
        for (const auto& img : images) {
            if (!img.same_size(width, height))
                throw std::invalid_argument("FilterStack: image size mismatch");
            for (double v : img.pixels())
                if (!std::isfinite(v) || v < 0.0)
                    throw std::invalid_argument("FilterStack: intensities must be finite and >= 0");
        }
    }
};

/// Intensity behind a linear polarizer at angle phi_pol:
/// I = I_un * (1 + rho * cos(2*(phi - phi_pol))).
inline double forward_intensity(const PolarSample& s, double phi_pol) {
    return s.i_un * (1.0 + s.dop * std::cos(2.0 * (s.aop - phi_pol)));
}

struct PolarEstimate {
    Image<PolarSample> samples;
    Image<double> residual;  // per-pixel RMS of the linear fit
    Mask valid;              // false where the pixel was degenerate
};

/// Per-pixel linear least squares for I_k = a0 + a1*cos(2phi_k) + a2*sin(2phi_k).
/// Pixels with a0 below 1e-6 of the stack maximum are flagged degenerate and
/// get (0, 0, 0).
inline PolarEstimate estimate_polarisation(const FilterStack& stack) {
    stack.validate();
    const size_t k = stack.angles.size();

    Eigen::MatrixXd design(k, 3);
    for (size_t i = 0; i < k; ++i) {
        design(i, 0) = 1.0;
        design(i, 1) = std::cos(2.0 * stack.angles[i]);
        design(i, 2) = std::sin(2.0 * stack.angles[i]);
    }
    // Normal equations; the 3x3 system is shared by every pixel.
    Eigen::Matrix3d gram = design.transpose() * design;
    Eigen::Matrix3d gram_inv = gram.inverse();

    double max_intensity = 0.0;
    for (const auto& img : stack.images)
        for (double v : img.pixels()) max_intensity = std::max(max_intensity, v);
    const double eps_intensity = 1e-6 * max_intensity;

    PolarEstimate out;
    out.samples = Image<PolarSample>(stack.width, stack.height);
    out.residual = Image<double>(stack.width, stack.height);
    out.valid = Mask(stack.width, stack.height, 0);

    parallel_for(out.samples.size(), [&](size_t p) {
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        for (size_t i = 0; i < k; ++i)
            rhs += design.row(i).transpose() * stack.images[i][p];
        Eigen::Vector3d coef = gram_inv * rhs;
        const double a0 = coef[0], a1 = coef[1], a2 = coef[2];

        double rss = 0.0;
        for (size_t i = 0; i < k; ++i) {
            double fit = design.row(i).dot(coef);
            double e = stack.images[i][p] - fit;
            rss += e * e;
        }
        out.residual[p] = std::sqrt(rss / static_cast<double>(k));

        if (!(a0 > eps_intensity)) {
            out.samples[p] = PolarSample{0.0, 0.0, 0.0};
            return;
        }
        double mag = std::hypot(a1, a2);
        if (mag <= 1e-12 * a0) mag = 0.0;  // round-off, not modulation
        PolarSample s;
        s.i_un = a0;
        s.dop = std::clamp(mag / a0, 0.0, 1.0);
        s.aop = mag > 0.0 ? wrap_pi(0.5 * std::atan2(a2, a1)) : 0.0;
        out.samples[p] = s;
        out.valid[p] = 1;
    });
    return out;
}

enum class ReflectionMode { Diffuse, Specular };

/// AoP -> both azimuth candidates (pi-ambiguity), reduced mod 2*pi.
/// Diffuse: {phi, phi+pi}. Specular: {phi+pi/2, phi+3pi/2}.
inline std::pair<double, double> aop_to_azimuth(double aop, ReflectionMode mode) {
    double base = mode == ReflectionMode::Diffuse ? aop : aop + kPi / 2.0;
    return {wrap_2pi(base), wrap_2pi(base + kPi)};
}

/// Diffuse Fresnel degree of polarization at zenith angle theta.
inline double dop_diffuse(double theta, const Material& m) {
    const double eta = m.eta();
    const double s2 = std::sin(theta) * std::sin(theta);
    const double a = eta - 1.0 / eta;
    const double b = eta + 1.0 / eta;
    double num = a * a * s2;
    double den = 2.0 + 2.0 * eta * eta - b * b * s2
               + 4.0 * std::cos(theta) * std::sqrt(eta * eta - s2);
    return num / den;
}

/// Specular Fresnel degree of polarization; peaks at 1 at Brewster's angle.
inline double dop_specular(double theta, const Material& m) {
    const double eta = m.eta();
    const double s2 = std::sin(theta) * std::sin(theta);
    double num = 2.0 * s2 * std::cos(theta) * std::sqrt(eta * eta - s2);
    double den = eta * eta - s2 - eta * eta * s2 + 2.0 * s2 * s2;
    if (den <= 0.0) return 1.0;
    return std::min(num / den, 1.0);
}

/// Brewster angle atan(eta), where dop_specular reaches 1.
inline double brewster(const Material& m) { return std::atan(m.eta()); }

/// Zenith angle candidates for a measured DoP: one diffuse, two specular.
struct ZenithSolutions {
    std::optional<double> theta_d;
    std::optional<double> theta_s1;  // <= brewster
    std::optional<double> theta_s2;  // >= brewster
};

namespace detail {

// Bisection for f(theta) = rho on [lo, hi]; f monotone on the bracket.
template <typename F>
double bisect(F&& f, double rho, double lo, double hi, bool increasing) {
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        double mid = 0.5 * (lo + hi);
        bool below = f(mid) < rho;
        if (below == increasing)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Inverts the Fresnel DoP curves. Absent entries mean the branch has no
/// solution for this rho (e.g. rho above the diffuse maximum).
inline ZenithSolutions invert_dop(double rho, const Material& m) {
    ZenithSolutions out;
    const double half_pi = kPi / 2.0;
    auto fd = [&](double t) { return dop_diffuse(t, m); };
    auto fs = [&](double t) { return dop_specular(t, m); };

    if (rho <= 0.0) {
        out.theta_d = 0.0;
        out.theta_s1 = 0.0;
        out.theta_s2 = half_pi;
        return out;
    }
    if (rho <= fd(half_pi))
        out.theta_d = detail::bisect(fd, rho, 0.0, half_pi, true);
    if (rho <= 1.0) {
        const double tb = brewster(m);
        if (rho >= 1.0) {
            out.theta_s1 = tb;
            out.theta_s2 = tb;
        } else {
            out.theta_s1 = detail::bisect(fs, rho, 0.0, tb, true);
            out.theta_s2 = detail::bisect(fs, rho, tb, half_pi, false);
        }
    }
    return out;
}

/// Surface normal from azimuth/zenith: (cos a sin t, sin a sin t, cos t).
inline Eigen::Vector3d normal_from_angles(double azimuth, double zenith) {
    return {std::cos(azimuth) * std::sin(zenith),
            std::sin(azimuth) * std::sin(zenith),
            std::cos(zenith)};
}

} // namespace polar6d
