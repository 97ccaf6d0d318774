// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences for gradient checks.

#pragma once

#include <cmath>
#include <functional>

namespace fd {

/// (f(x + h) - f(x - h)) / 2h, restoring x afterwards.
double central(const std::function<double()>& f, double& x, double h);

/// |a - b| / max(|a|, |b|, floor).
double rel_err(double a, double b, double floor = 1e-8);

}  // namespace fd

namespace fd {

/// Fourth-order central difference
/// (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h, restoring x afterwards.
double central5(const std::function<double()>& f, double& x, double h);

}  // namespace fd
