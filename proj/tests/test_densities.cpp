#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "psopdf/densities.hpp"
#include "support.hpp"

using namespace psopdf;
using density::DensitySpec;

namespace {

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Si(x) by composite Simpson on sin(t)/t.
double sine_integral(double x, int intervals) {
  const double h = x / intervals;
  auto f = [](double t) { return t == 0.0 ? 1.0 : std::sin(t) / t; };
  double sum = f(0.0) + f(x);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return sum * h / 3.0;
}

double midpoint_integral(const DensitySpec& spec, std::size_t per_dim) {
  const auto& box = spec.support();
  const std::size_t dim = box.dim();
  std::vector<double> h(dim);
  double cell = 1.0;
  std::size_t total = 1;
  for (std::size_t d = 0; d < dim; ++d) {
    h[d] = (box.high[d] - box.low[d]) / static_cast<double>(per_dim);
    cell *= h[d];
    total *= per_dim;
  }
  std::vector<double> x(dim);
  double sum = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    for (std::size_t d = 0; d < dim; ++d) {
      x[d] = box.low[d] + (static_cast<double>(rest % per_dim) + 0.5) * h[d];
      rest /= per_dim;
    }
    sum += density::pdf_eval(spec, x);
  }
  return sum * cell;
}

}  // namespace

TEST_CASE("cosine normaliser matches 16 + Si(16)") {
  const double mu = 16.0 + sine_integral(16.0, 200000);
  CHECK(std::abs(mu - density::kCosineNormalizer) < 1e-9);
  CHECK_NOTHROW(density::verify_cosine_normalizer());
}

TEST_CASE("point values") {
  const std::vector<double> origin2{0.0, 0.0};
  CHECK(density::pdf_eval(DensitySpec::cosine(), origin2) ==
        doctest::Approx(2.0 / 17.631302268269998).epsilon(1e-15));
  CHECK(density::pdf_eval(DensitySpec::cosine(), origin2) == doctest::Approx(0.1134351).epsilon(1e-6));

  const double marginal = 0.2 * (phi(0.0) + 2.0 * phi(5.0)) / 0.2;
  CHECK(density::pdf_eval(DensitySpec::columns(), origin2) ==
        doctest::Approx(marginal * marginal).epsilon(1e-12));
  CHECK(density::pdf_eval(DensitySpec::columns(), origin2) == doctest::Approx(0.159157).epsilon(1e-5));

  const std::vector<double> origin3{0.0, 0.0, 0.0};
  CHECK(std::abs(density::pdf_eval(DensitySpec::range_msr(), origin3) - 0.0625 * phi(0.0)) < 1e-6);

  const std::vector<double> on_column{2.0, 0.0};
  const double uniform_marginal = 0.2 / 0.6 + 0.2 * phi(5.0) / 0.2;
  CHECK(density::pdf_eval(DensitySpec::columns(), on_column) ==
        doctest::Approx(uniform_marginal * marginal).epsilon(1e-12));
}

TEST_CASE("zero outside the support box") {
  const std::vector<double> far2{2.5, 0.0};
  CHECK(density::pdf_eval(DensitySpec::cosine(), far2) == 0.0);
  const std::vector<double> far_columns{0.0, 2.31};
  CHECK(density::pdf_eval(DensitySpec::columns(), far_columns) == 0.0);
  const std::vector<double> far3{0.0, 0.0, 8.5};
  CHECK(density::pdf_eval(DensitySpec::range_msr(), far3) == 0.0);
  const auto box = DensitySpec::uniform_box({{0.0, 0.0}, {1.0, 2.0}});
  const std::vector<double> outside{1.5, 0.5};
  const std::vector<double> inside{0.5, 0.5};
  CHECK(density::pdf_eval(box, outside) == 0.0);
  CHECK(density::pdf_eval(box, inside) == doctest::Approx(0.5));
}

TEST_CASE("dimension mismatch throws") {
  const std::vector<double> x3{0.0, 0.0, 0.0};
  CHECK_THROWS_AS(density::pdf_eval(DensitySpec::cosine(), x3), std::invalid_argument);
}

TEST_CASE("normalisation by midpoint rule") {
  CHECK(midpoint_integral(DensitySpec::cosine(), 513) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(midpoint_integral(DensitySpec::columns(), 513) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(midpoint_integral(DensitySpec::range_msr(), 129) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(midpoint_integral(DensitySpec::diag_gaussian({0.5, -1.0}, {0.3, 2.0}), 257) ==
        doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("non-negative on a dense sweep") {
  RandomStream s(3);
  for (const auto& spec : {DensitySpec::cosine(), DensitySpec::columns(), DensitySpec::range_msr()}) {
    const auto pts = testing::uniform_points(spec.dim(), 5000, -9.0, 9.0, s);
    CHECK(density::pdf_eval_batch(spec, pts).minCoeff() >= 0.0);
  }
}

TEST_CASE("peak values") {
  CHECK(DensitySpec::cosine().peak() == doctest::Approx(2.0 / density::kCosineNormalizer));
  const auto g = DensitySpec::diag_gaussian({0.0}, {0.5});
  CHECK(g.peak() == doctest::Approx(phi(0.0) / 0.5));
  const std::vector<double> origin2{0.0, 0.0};
  CHECK(DensitySpec::columns().peak() >= density::pdf_eval(DensitySpec::columns(), origin2));
}

TEST_CASE("samplers stay inside the support and are reproducible") {
  for (const auto& spec : {DensitySpec::cosine(), DensitySpec::columns(), DensitySpec::range_msr(),
                           DensitySpec::diag_gaussian({1.0, 2.0}, {0.1, 0.2})}) {
    RandomStream a(9);
    RandomStream b(9);
    const auto xa = density::sample_batch(spec, 2000, a);
    const auto xb = density::sample_batch(spec, 2000, b);
    CHECK(xa == xb);
    for (Eigen::Index j = 0; j < xa.cols(); ++j) {
      REQUIRE(spec.support().contains(testing::column(xa, j)));
    }
  }
  RandomStream s(1);
  CHECK_THROWS(density::sample_batch(DensitySpec::cosine(), 0, s));
}

TEST_CASE("columns strip carries a fifth of the mass") {
  RandomStream s(21);
  const auto x = density::sample_batch(DensitySpec::columns(), 1000000, s);
  const double frac = ((x.row(0).array() >= 1.7) && (x.row(0).array() <= 2.3)).cast<double>().mean();
  CHECK(std::abs(frac - 0.2) < 0.002);
}

TEST_CASE("rangemsr residual has zero mean and unit spread") {
  RandomStream s(22);
  const auto x = density::sample_batch(DensitySpec::range_msr(), 1000000, s);
  const Eigen::ArrayXd r = (x.row(0).array().square() + x.row(1).array().square()).sqrt().transpose();
  const Eigen::ArrayXd residual = x.row(2).array().transpose() - r;
  CHECK(std::abs(residual.mean()) < 0.004);
  CHECK(std::abs((residual - residual.mean()).square().mean() - 1.0) < 0.01);
  CHECK(x.row(0).minCoeff() >= -2.0);
  CHECK(x.row(0).maxCoeff() <= 2.0);
}

TEST_CASE("cosine sampler matches the pdf in quadrants") {
  // Mass of the central square [-1,1]^2: (4 + int sin(4y)/(2y) over [-1,1]) / mu = (4 + Si(4)) / mu.
  const double expected = (4.0 + sine_integral(4.0, 20000)) / density::kCosineNormalizer;
  RandomStream s(23);
  const auto x = density::sample_batch(DensitySpec::cosine(), 400000, s);
  const double frac = ((x.row(0).array().abs() <= 1.0) && (x.row(1).array().abs() <= 1.0)).cast<double>().mean();
  CHECK(std::abs(frac - expected) < 5.0 * std::sqrt(expected * (1 - expected) / 400000.0));
}

TEST_CASE("proposal boxes") {
  const auto p0 = density::proposal_for(DensitySpec::cosine(), 0.0);
  const std::vector<double> inside{1.9, -1.9};
  CHECK(density::pdf_eval(p0, inside) == doctest::Approx(1.0 / 16.0));
  const auto p5 = density::proposal_for(DensitySpec::cosine(), 0.5);
  CHECK(density::pdf_eval(p5, inside) == doctest::Approx(1.0 / 25.0));
  const std::vector<double> outside{2.6, 0.0};
  CHECK(density::pdf_eval(p5, outside) == 0.0);
  const auto p3 = density::proposal_for(DensitySpec::range_msr(), 0.0);
  CHECK(p3.support().volume() == doctest::Approx(4.0 * 4.0 * 12.0));
  CHECK_THROWS(density::proposal_for(DensitySpec::cosine(), -0.1));
}

TEST_CASE("names and parameter round trip") {
  CHECK(density::target_by_name("cosine") == DensitySpec::cosine());
  CHECK(density::target_by_name("columns") == DensitySpec::columns());
  CHECK(density::target_by_name("rangemsr") == DensitySpec::range_msr());
  CHECK_THROWS_AS(density::target_by_name("banana"), std::invalid_argument);
  for (const auto& spec : {DensitySpec::cosine(), DensitySpec::uniform_box({{-1, 0, 2}, {1, 3, 4}}),
                           DensitySpec::diag_gaussian({0.0, 1.0}, {1.0, 0.5})}) {
    const auto values = spec.parameters();
    CHECK(DensitySpec::from_parameters(spec.kind(), spec.dim(), values) == spec);
  }
  CHECK_THROWS(DensitySpec::uniform_box({{0.0}, {0.0}}));
  CHECK_THROWS(DensitySpec::diag_gaussian({0.0}, {0.0}));
}
