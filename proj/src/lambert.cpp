#include <meco/lambert.hpp>

#include <meco/error.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace meco {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxHalley = 64;

// Halley iteration on w e^w = x for arguments away from the branch point.
double halley_w0(double x)
{
    double w;
    if (x < 1.0) {
        w = std::log1p(x);
    } else {
        const double l1 = std::log(x);
        const double l2 = std::log(l1 > 1.0 ? l1 : 1.0);
        w = l1 - l2 + (l1 > 1.0 ? l2 / l1 : 0.0);
    }
    for (int it = 0; it < kMaxHalley; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        const double step = f / denom;
        w -= step;
        if (std::abs(step) <= 4.0 * kEps * (1.0 + std::abs(w))) break;
    }
    return w;
}

} // namespace

double lambert_w0_shifted_inverse(double d)
{
    if (d < 0.0) throw InvalidInput("lambert_w0_shifted_inverse: negative offset");
    if (d > 1.0) return 1.0 - (1.0 - d) * std::exp(d);
    // sum_{n>=2} (n-1) d^n / n!
    double term = d; // d^n / n! for n = 1
    double sum = 0.0;
    for (int n = 2; n < 40; ++n) {
        term *= d / n;
        const double add = (n - 1) * term;
        sum += add;
        if (add <= kEps * sum) break;
    }
    return sum;
}

double lambert_w0_shifted(double p)
{
    if (std::isnan(p) || p < 0.0) throw InvalidInput("lambert_w0_shifted: p must be >= 0");
    if (p == 0.0) return 0.0;
    if (p >= 0.5) return 1.0 + halley_w0(-(1.0 - p) / std::numbers::e);

    // Branch-point series as the starting guess, then Halley on
    // S(d) = 1 - (1 - d) e^d = p, which is well conditioned in d.
    const double s = std::sqrt(2.0 * p);
    double d = s - s * s / 3.0 + 11.0 / 72.0 * s * s * s;
    if (d <= 0.0) d = s;
    for (int it = 0; it < kMaxHalley; ++it) {
        const double ed = std::exp(d);
        const double f = lambert_w0_shifted_inverse(d) - p;
        const double f1 = d * ed;
        const double f2 = (1.0 + d) * ed;
        const double step = 2.0 * f * f1 / (2.0 * f1 * f1 - f * f2);
        double next = d - step;
        if (next <= 0.0) next = 0.5 * d;
        const bool done = std::abs(next - d) <= 4.0 * kEps * next;
        d = next;
        if (done) break;
    }
    return d;
}

double lambert_w0(double x)
{
    constexpr double branch = -1.0 / std::numbers::e;
    if (std::isnan(x)) throw InvalidInput("lambert_w0: NaN argument");
    const double p = 1.0 + std::numbers::e * x;
    if (x < branch && p < -8.0 * kEps) {
        std::ostringstream os;
        os << "lambert_w0: argument " << x << " is below -1/e";
        throw InvalidInput(os.str());
    }
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return x;
    if (p < 0.5) return lambert_w0_shifted(p > 0.0 ? p : 0.0) - 1.0;
    return halley_w0(x);
}

} // namespace meco
