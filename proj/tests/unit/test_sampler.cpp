#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cresmd/beta.hpp"
#include "cresmd/dataset.hpp"
#include "cresmd/error.hpp"
#include "cresmd/sampler.hpp"
#include "cresmd/synthesis.hpp"

using namespace cresmd;

namespace {

// sup |F_n - F| over the sorted sample, checking both sides of every step.
double kolmogorov_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, std::abs((i + 1) / n - f), std::abs(f - i / n)});
  }
  return d;
}

std::vector<double> draw(const BetaParams& p, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = beta_sample(rng, p);
  return out;
}

bool on_grid(double level, double stride) {
  const double k = level / stride;
  return std::abs(k - std::round(k)) < 1e-9;
}

}  // namespace

TEST_SUITE("beta") {
  TEST_CASE("closed-form pdf values") {
    for (double z : {0.01, 0.3, 0.5, 0.99}) CHECK(beta_pdf(z, {1, 1}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(beta_pdf(0.25, {0.5, 1}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(beta_pdf(0.5, {1, 2}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(beta_pdf(0.3, {2, 3}) == doctest::Approx(12.0 * 0.3 * 0.49).epsilon(1e-13));
  }

  TEST_CASE("pdf errors") {
    CHECK_THROWS_AS(beta_pdf(0.0, {1, 1}), RangeError);
    CHECK_THROWS_AS(beta_pdf(1.0, {1, 1}), RangeError);
    CHECK_THROWS_AS(beta_pdf(0.5, {0, 1}), RangeError);
    CHECK_THROWS_AS(beta_pdf(0.5, {1, -1}), RangeError);
    Rng rng(1);
    CHECK_THROWS_AS(beta_sample(rng, {0, 1}), RangeError);
  }

  TEST_CASE("pdf integrates to one") {
    boost::math::quadrature::tanh_sinh<double> integrator;
    for (const BetaParams p : {BetaParams{0.5, 1}, BetaParams{1, 1}, BetaParams{0.2, 1}, BetaParams{1, 2},
                               BetaParams{2.5, 0.7}}) {
      const double total = integrator.integrate([&](double z) { return beta_pdf(z, p); }, 0.0, 1.0);
      CHECK(std::abs(total - 1.0) <= 1e-6);
    }
  }

  TEST_CASE("empirical CDFs at n=1e5") {
    struct Case {
      BetaParams p;
      std::function<double(double)> cdf;
    };
    const std::vector<Case> cases = {
        {{0.5, 1}, [](double z) { return std::sqrt(z); }},
        {{1, 1}, [](double z) { return z; }},
        {{0.2, 1}, [](double z) { return std::pow(z, 0.2); }},
        {{1, 2}, [](double z) { return 1.0 - (1.0 - z) * (1.0 - z); }},
        {{2, 2}, [](double z) { return z * z * (3.0 - 2.0 * z); }},
    };
    std::uint64_t seed = 10;
    for (const auto& c : cases) {
      const auto samples = draw(c.p, 100000, seed++);
      for (double z : samples) REQUIRE((z > 0.0 && z < 1.0));
      CHECK(kolmogorov_distance(samples, c.cdf) < 0.01);
    }
  }

  TEST_CASE("b=1 is the inverse transform") {
    Rng a(3), b(3);
    for (int i = 0; i < 100; ++i) CHECK(beta_sample(a, {0.5, 1}) == std::pow(b.uniform_open(), 2.0));
  }

  TEST_CASE("gamma moments") {
    for (double shape : {0.3, 1.0, 4.5}) {
      Rng rng(20);
      const int n = 100000;
      double s = 0, s2 = 0;
      for (int i = 0; i < n; ++i) {
        const double x = gamma_sample(rng, shape);
        s += x;
        s2 += x * x;
      }
      const double mean = s / n, var = s2 / n - mean * mean;
      CHECK(std::abs(mean - shape) < 5.0 * std::sqrt(shape / n));
      CHECK(var == doctest::Approx(shape).epsilon(0.05));
    }
  }

  TEST_CASE("reproducible") { CHECK(draw({0.7, 1.3}, 50, 4) == draw({0.7, 1.3}, 50, 4)); }

  TEST_CASE("json") {
    nlohmann::json j = BetaParams{0.2, 3.0};
    CHECK(j.get<BetaParams>() == BetaParams{0.2, 3.0});
  }
}

TEST_SUITE("sampling") {
  TEST_CASE("snapping rule example") {
    const auto space = DegradationSpace::paper_3d();
    const std::vector<std::optional<double>> draws{0.5125, std::nullopt, std::nullopt};
    const auto spec = spec_from_draws(space, draws);
    CHECK(spec.blur_r == doctest::Approx(2.1).epsilon(1e-12));
    CHECK(spec.noise_sigma == 0.0);
    CHECK_FALSE(spec.jpeg_quality.has_value());
  }

  TEST_CASE("tiny draws reach the zero spec") {
    const auto space = DegradationSpace::paper_3d();
    const std::vector<std::optional<double>> draws{0.01, 0.009, 0.04};
    CHECK(spec_from_draws(space, draws).is_zero());
  }

  TEST_CASE("jpeg snapping") {
    const auto& d = DegradationSpace::paper_3d().dim(2);
    CHECK(snap_jpeg(d, 0.0) == std::nullopt);
    CHECK(snap_jpeg(d, 0.049) == std::nullopt);
    CHECK(snap_jpeg(d, 0.05) == 100);
    CHECK(snap_jpeg(d, 1.0) == 10);
    CHECK(snap_jpeg(d, 0.6) == 50);
    for (double z = 0.05; z <= 1.0; z += 0.0007) {
      const auto q = snap_jpeg(d, z);
      REQUIRE(q.has_value());
      CHECK(*q % 2 == 0);
      CHECK((*q >= 10 && *q <= 100));
    }
  }

  TEST_CASE("snapped levels stay on the grid and in range") {
    const auto space = DegradationSpace::paper_3d();
    SamplePlan plan;
    Rng rng(5);
    for (int i = 0; i < 20000; ++i) {
      const auto spec = sample_spec(plan, space, rng);
      CHECK_NOTHROW(space.validate(spec));
      CHECK(on_grid(spec.blur_r, 0.1));
      CHECK(on_grid(spec.noise_sigma, 1.0));
      if (spec.jpeg_quality) CHECK(*spec.jpeg_quality % 2 == 0);
    }
  }

  TEST_CASE("single mode activates exactly one axis") {
    const auto space = DegradationSpace::paper_3d();
    SamplePlan plan;
    plan.single_ratio = 1.0;
    plan.beta = {BetaParams{5, 1}};  // mass near 1, so active axes are rarely snapped to zero
    Rng rng(6);
    std::set<int> seen;
    for (int i = 0; i < 3000; ++i) {
      const auto s = sample_spec(plan, space, rng);
      const int active = (s.blur_r > 0) + (s.noise_sigma > 0) + (s.jpeg_quality.has_value());
      CHECK(active <= 1);
      if (s.blur_r > 0) seen.insert(0);
      if (s.noise_sigma > 0) seen.insert(1);
      if (s.jpeg_quality) seen.insert(2);
    }
    CHECK(seen.size() == 3);
  }

  TEST_CASE("mix ratio") {
    const auto space = DegradationSpace::paper_2d();
    SamplePlan plan;
    plan.beta = {BetaParams{20, 1}};
    Rng rng(7);
    int combined = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const auto s = sample_spec(plan, space, rng);
      combined += (s.blur_r > 0 && s.noise_sigma > 0);
    }
    CHECK(combined / static_cast<double>(n) == doctest::Approx(0.5).epsilon(0.05));
  }

  TEST_CASE("blur level distribution follows the beta CDF") {
    // Levels <= 1.0 on [0,4] at stride 0.1 are draws below 10.5/40 after
    // nearest snapping; the unsnapped fraction below 0.25 is CDF(0.25)=0.5.
    const auto space = DegradationSpace::paper_2d();
    SamplePlan plan;
    plan.single_ratio = 0.0;
    Rng rng(8);
    const int n = 100000;
    int below = 0;
    for (int i = 0; i < n; ++i) below += sample_spec(plan, space, rng).blur_r <= 1.0 + 1e-12;
    CHECK(std::abs(below / static_cast<double>(n) - std::sqrt(10.5 / 40.0)) < 0.01);

    Rng raw(9);
    int raw_below = 0;
    for (int i = 0; i < n; ++i) raw_below += beta_sample(raw, {0.5, 1}) <= 0.25;
    CHECK(std::abs(raw_below / static_cast<double>(n) - 0.5) < 0.01);
  }

  TEST_CASE("plan validation and json") {
    const auto space = DegradationSpace::paper_2d();
    SamplePlan plan;
    plan.single_ratio = 1.5;
    CHECK_THROWS_AS(plan.validate(space), RangeError);
    plan.single_ratio = 0.3;
    plan.beta = {BetaParams{1, 1}, BetaParams{1, 1}, BetaParams{1, 1}};
    CHECK_THROWS_AS(plan.validate(space), RangeError);
    plan.beta = {BetaParams{0.5, 1}, BetaParams{1, 2}};
    plan.pinned = DegradationSpec{1.0, 15.0, std::nullopt};
    CHECK_NOTHROW(plan.validate(space));
    const auto back = SamplePlan::from_json(plan.to_json());
    CHECK(back.beta == plan.beta);
    CHECK(back.single_ratio == plan.single_ratio);
    CHECK(back.pinned == plan.pinned);
    CHECK(&plan.beta_for(1) == &plan.beta[1]);
  }
}

TEST_SUITE("batches") {
  const std::vector<Image> dataset = {procedural_texture(64, 1), procedural_texture(64, 2)};

  TEST_CASE("dihedral group") {
    const Image img = procedural_texture(16, 3);
    std::set<std::vector<float>> orbit;
    for (int code = 0; code < 8; ++code) orbit.insert(dihedral_transform(img, code).data);
    CHECK(orbit.size() == 8);
    // Four quarter turns and two flips are the identity.
    Image r = img;
    for (int i = 0; i < 4; ++i) r = dihedral_transform(r, 1);
    CHECK(r == img);
    CHECK(dihedral_transform(dihedral_transform(img, 4), 4) == img);
    // One counter-clockwise quarter turn moves the top-right corner to the top-left.
    CHECK(dihedral_transform(img, 1).at(0, 0, 0) == img.at(0, 0, 15));
    CHECK_THROWS_AS(dihedral_transform(Image::zeros(1, 4, 6), 1), ShapeError);
    Image wide = Image::zeros(1, 4, 6);
    for (std::size_t i = 0; i < wide.data.size(); ++i) wide.data[i] = static_cast<float>(i);
    const Image half = dihedral_transform(wide, 2), flipped_half = dihedral_transform(wide, 6);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 6; ++x) {
        CHECK(half.at(0, y, x) == wide.at(0, 3 - y, 5 - x));
        CHECK(flipped_half.at(0, y, x) == wide.at(0, 3 - y, x));
      }
  }

  TEST_CASE("pinned zero plan gives identity pairs") {
    SamplePlan plan;
    plan.pinned = DegradationSpec{};
    Rng rng(1);
    const auto batch = make_batch(dataset, plan, DegradationSpace::desk_2d(), 32, 6, rng);
    CHECK(batch.size() == 6);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(batch.degraded[i] == batch.clean[i]);
      CHECK(batch.conditions[i] == std::vector<double>{0, 0});
    }
  }

  TEST_CASE("fixed seed gives identical batches") {
    SamplePlan plan;
    const auto space = DegradationSpace::desk_2d();
    Rng a(2), b(2);
    const auto x = make_batch(dataset, plan, space, 24, 4, a);
    const auto y = make_batch(dataset, plan, space, 24, 4, b);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(x.degraded[i] == y.degraded[i]);
      CHECK(x.clean[i] == y.clean[i]);
      CHECK(x.specs[i] == y.specs[i]);
    }
  }

  TEST_CASE("elements replay from their seed") {
    SamplePlan plan;
    const auto space = DegradationSpace::paper_3d();
    Rng rng(3);
    const auto batch = make_batch(dataset, plan, space, 32, 5, rng);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto s = make_sample(dataset, plan, space, 32, batch.seeds[i]);
      CHECK(s.degraded == batch.degraded[i]);
      CHECK(s.clean == batch.clean[i]);
      CHECK(s.spec == batch.specs[i]);
      CHECK(s.condition == space.encode(s.spec));
      for (double z : batch.conditions[i]) CHECK((z >= 0.0 && z <= 1.0));
    }
  }

  TEST_CASE("degraded equals degrade(clean) under the recorded spec") {
    // Re-derive the rng position: make_sample draws image index, crop,
    // flip and turn, then the spec, then the degradation.
    SamplePlan plan;
    plan.pinned = DegradationSpec{1.0, 10.0, std::nullopt};
    const auto space = DegradationSpace::desk_2d();
    const auto s = make_sample(dataset, plan, space, 32, 99);
    Rng rng(99);
    rng.uniform_int(dataset.size());
    rng.uniform_int(64 - 32 + 1);
    rng.uniform_int(64 - 32 + 1);
    rng.uniform_int(2);
    rng.uniform_int(4);
    CHECK(degrade(s.clean, s.spec, rng) == s.degraded);
  }

  TEST_CASE("full-size crops span the dihedral orbit") {
    const std::vector<Image> one = {procedural_texture(64, 4)};
    SamplePlan plan;
    plan.pinned = DegradationSpec{};
    Rng rng(4);
    const auto batch = make_batch(one, plan, DegradationSpace::desk_2d(), 64, 16, rng);
    std::set<std::vector<float>> orbit;
    for (int code = 0; code < 8; ++code) orbit.insert(dihedral_transform(one[0], code).data);
    for (const auto& c : batch.clean) CHECK(orbit.count(c.data) == 1);
  }

  TEST_CASE("crop larger than the source") {
    SamplePlan plan;
    Rng rng(5);
    CHECK_THROWS_AS(make_batch(dataset, plan, DegradationSpace::desk_2d(), 65, 1, rng), ShapeError);
    CHECK_THROWS_AS(make_batch({}, plan, DegradationSpace::desk_2d(), 8, 1, rng), RangeError);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("procedural textures are deterministic, quantized and varied") {
    const Image a = procedural_texture(64, 7);
    CHECK(a == procedural_texture(64, 7));
    CHECK_FALSE(a == procedural_texture(64, 8));
    CHECK(quantize_image(a) == a);
    double mean = 0.0;
    for (float v : a.data) mean += v;
    mean /= a.data.size();
    double var = 0.0;
    for (float v : a.data) var += (v - mean) * (v - mean);
    CHECK(var / a.data.size() > 1e-3);
  }

  TEST_CASE("directory round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "cresmd_dataset_test";
    std::filesystem::remove_all(dir);
    write_procedural_dataset(dir, 3, 32, 11);
    const auto images = load_dataset_dir(dir);
    REQUIRE(images.size() == 3);
    CHECK(images[1] == procedural_texture(32, mix64(12)));
    CHECK_THROWS_AS(load_dataset_dir(dir / "missing"), IoError);
  }
}
