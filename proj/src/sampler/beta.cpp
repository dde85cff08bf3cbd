#include "cresmd/beta.hpp"

#include <cmath>
#include <string>

#include "cresmd/error.hpp"

namespace cresmd {

void validate(const BetaParams& params) {
  if (!(params.a > 0.0) || !(params.b > 0.0) || !std::isfinite(params.a) || !std::isfinite(params.b)) {
    throw RangeError("beta shape parameters must be positive, got (" + std::to_string(params.a) + ", " +
                     std::to_string(params.b) + ")");
  }
}

double beta_pdf(double z, const BetaParams& params) {
  validate(params);
  if (!(z > 0.0 && z < 1.0)) throw RangeError("beta_pdf: z must lie in (0,1), got " + std::to_string(z));
  const double log_beta = std::lgamma(params.a) + std::lgamma(params.b) - std::lgamma(params.a + params.b);
  return std::exp((params.a - 1.0) * std::log(z) + (params.b - 1.0) * std::log1p(-z) - log_beta);
}

double gamma_sample(Rng& rng, double shape) {
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a).
    const double u = rng.uniform_open();
    return gamma_sample(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double beta_sample(Rng& rng, const BetaParams& params) {
  validate(params);
  for (;;) {
    double z;
    if (params.b == 1.0) {
      z = std::pow(rng.uniform_open(), 1.0 / params.a);
    } else {
      const double x = gamma_sample(rng, params.a);
      const double y = gamma_sample(rng, params.b);
      z = x / (x + y);
    }
    // Underflow can land exactly on an endpoint for tiny shapes.
    if (z > 0.0 && z < 1.0) return z;
  }
}

void to_json(nlohmann::json& j, const BetaParams& p) { j = nlohmann::json{{"a", p.a}, {"b", p.b}}; }

void from_json(const nlohmann::json& j, BetaParams& p) {
  j.at("a").get_to(p.a);
  j.at("b").get_to(p.b);
}

}  // namespace cresmd
