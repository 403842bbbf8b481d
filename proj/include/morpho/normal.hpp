#pragma once

namespace morpho {

/// Standard normal quantile (Acklam's rational approximation, |error| < 1.2e-9).
/// Exactly 0 at p = 0.5. Throws std::domain_error outside (0, 1).
double normal_quantile(double p);

}  // namespace morpho
