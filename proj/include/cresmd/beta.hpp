#pragma once

#include <json.hpp>

#include "cresmd/rng.hpp"

namespace cresmd {

// Shape parameters of a Beta(a, b) distribution; both strictly positive.
struct BetaParams {
  double a = 0.5;
  double b = 1.0;

  bool operator==(const BetaParams&) const = default;
};

void validate(const BetaParams& params);

// z^(a-1) (1-z)^(b-1) / B(a,b) for z in (0,1); B via log-gamma.
double beta_pdf(double z, const BetaParams& params);

// Draws z in (0,1). b == 1 uses the inverse transform z = u^(1/a);
// otherwise z = X/(X+Y) with X ~ Gamma(a), Y ~ Gamma(b) drawn by the
// Marsaglia-Tsang squeeze/rejection method.
double beta_sample(Rng& rng, const BetaParams& params);

// Gamma(shape, 1) variate.
double gamma_sample(Rng& rng, double shape);

void to_json(nlohmann::json& j, const BetaParams& p);
void from_json(const nlohmann::json& j, BetaParams& p);

}  // namespace cresmd
