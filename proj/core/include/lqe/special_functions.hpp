#pragma once

namespace lqe {

// Argument shift to x >= 10 followed by the asymptotic (Stirling-type)
// series; absolute error below 1e-12 for x in [1, 1e6]. Domain: x > 0.

double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

}  // namespace lqe
