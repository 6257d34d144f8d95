#pragma once

namespace meco {

/// Principal branch of the Lambert W function: the w >= -1 with w e^w = x.
/// Defined for x >= -1/e; throws InvalidInput below the branch point.
double lambert_w0(double x);

/// 1 + W0(-(1 - p) / e) for p >= 0, i.e. the distance of W0 from its branch
/// point. Evaluated without the cancellation that plain lambert_w0 suffers
/// when its argument is close to -1/e.
double lambert_w0_shifted(double p);

/// Inverse of lambert_w0_shifted: returns 1 - (1 - d) e^d for d >= 0.
double lambert_w0_shifted_inverse(double d);

} // namespace meco
