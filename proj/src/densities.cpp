#include "psopdf/densities.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace psopdf::density {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_pdf(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return kInvSqrt2Pi / stddev * std::exp(-0.5 * z * z);
}

// One marginal of Columns: five equally weighted components.
constexpr double kColumnWeight = 0.2;
constexpr double kColumnStd = 0.2;
constexpr std::array<double, 3> kColumnMeans{-1.0, 0.0, 1.0};
constexpr double kColumnUniformLow = 1.7;
constexpr double kColumnUniformHigh = 2.3;

double columns_marginal(double x) {
  double p = 0.0;
  for (double m : kColumnMeans) p += kColumnWeight * normal_pdf(x, m, kColumnStd);
  const double uniform_density = 1.0 / (kColumnUniformHigh - kColumnUniformLow);
  const double a = std::abs(x);
  if (a >= kColumnUniformLow && a <= kColumnUniformHigh) p += kColumnWeight * uniform_density;
  return p;
}

double columns_marginal_draw(RandomStream& rng) {
  switch (rng.below(5)) {
    case 0:
      return rng.uniform(-kColumnUniformHigh, -kColumnUniformLow);
    case 1:
      return rng.normal(kColumnMeans[0], kColumnStd);
    case 2:
      return rng.normal(kColumnMeans[1], kColumnStd);
    case 3:
      return rng.normal(kColumnMeans[2], kColumnStd);
    default:
      return rng.uniform(kColumnUniformLow, kColumnUniformHigh);
  }
}

constexpr double kRangeXY = 2.0;
constexpr double kRangeStd = 1.0;
constexpr double kRangeFLow = -4.0;
constexpr double kRangeFHigh = 8.0;
constexpr double kGaussianTruncation = 8.0;

SupportBox square(double half_width) { return {{-half_width, -half_width}, {half_width, half_width}}; }

void check_dim(const DensitySpec& spec, std::size_t got) {
  if (got != spec.dim()) {
    throw std::invalid_argument("density " + spec.name() + " expects dimension " +
                                std::to_string(spec.dim()) + ", got " + std::to_string(got));
  }
}

void draw_one(const DensitySpec& spec, RandomStream& rng, double* out) {
  const SupportBox& box = spec.support();
  std::visit(
      Overloaded{
          [&](const Cosine2D&) {
            const double envelope = 2.0 / kCosineNormalizer;
            while (true) {
              const double x = rng.uniform(box.low[0], box.high[0]);
              const double y = rng.uniform(box.low[1], box.high[1]);
              const double p = (std::cos(4.0 * x * y) + 1.0) / kCosineNormalizer;
              if (rng.uniform() * envelope < p) {
                out[0] = x;
                out[1] = y;
                return;
              }
            }
          },
          [&](const Columns2D&) {
            for (int d = 0; d < 2; ++d) {
              double v;
              do {
                v = columns_marginal_draw(rng);
              } while (v < box.low[d] || v > box.high[d]);
              out[d] = v;
            }
          },
          [&](const RangeMsr3D&) {
            const double x = rng.uniform(-kRangeXY, kRangeXY);
            const double y = rng.uniform(-kRangeXY, kRangeXY);
            const double r = std::sqrt(x * x + y * y);
            double f;
            do {
              f = rng.normal(r, kRangeStd);
            } while (f < kRangeFLow || f > kRangeFHigh);
            out[0] = x;
            out[1] = y;
            out[2] = f;
          },
          [&](const UniformBox& u) {
            for (std::size_t d = 0; d < u.box.dim(); ++d) {
              out[d] = rng.uniform(u.box.low[d], u.box.high[d]);
            }
          },
          [&](const DiagGaussian& g) {
            for (std::size_t d = 0; d < g.mean.size(); ++d) {
              double v;
              do {
                v = rng.normal(g.mean[d], g.stddev[d]);
              } while (v < box.low[d] || v > box.high[d]);
              out[d] = v;
            }
          },
      },
      spec.params());
}

}  // namespace

double SupportBox::volume() const {
  double v = 1.0;
  for (std::size_t d = 0; d < dim(); ++d) v *= high[d] - low[d];
  return v;
}

bool SupportBox::contains(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (!(x[d] >= low[d] && x[d] <= high[d])) return false;
  }
  return true;
}

SupportBox SupportBox::expanded(double margin) const {
  SupportBox out = *this;
  for (std::size_t d = 0; d < dim(); ++d) {
    out.low[d] -= margin;
    out.high[d] += margin;
  }
  out.validate();
  return out;
}

void SupportBox::validate() const {
  if (low.empty() || low.size() != high.size()) {
    throw std::invalid_argument("support box: bounds must be non-empty and of equal length");
  }
  for (std::size_t d = 0; d < dim(); ++d) {
    if (!std::isfinite(low[d]) || !std::isfinite(high[d]) || !(low[d] < high[d])) {
      throw std::invalid_argument("support box: need finite low < high in every dimension");
    }
  }
}

DensitySpec::DensitySpec(Params params, SupportBox support)
    : params_(std::move(params)), support_(std::move(support)) {
  support_.validate();
}

DensitySpec DensitySpec::cosine() { return DensitySpec(Cosine2D{}, square(2.0)); }

DensitySpec DensitySpec::columns() { return DensitySpec(Columns2D{}, square(kColumnUniformHigh)); }

DensitySpec DensitySpec::range_msr() {
  return DensitySpec(RangeMsr3D{},
                     {{-kRangeXY, -kRangeXY, kRangeFLow}, {kRangeXY, kRangeXY, kRangeFHigh}});
}

DensitySpec DensitySpec::uniform_box(SupportBox box) {
  box.validate();
  return DensitySpec(UniformBox{box}, box);
}

DensitySpec DensitySpec::diag_gaussian(std::vector<double> mean, std::vector<double> stddev) {
  if (mean.empty() || mean.size() != stddev.size()) {
    throw std::invalid_argument("diag gaussian: mean and stddev must have equal, non-zero length");
  }
  SupportBox box;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    if (!(stddev[d] > 0.0)) throw std::invalid_argument("diag gaussian: stddev must be positive");
    box.low.push_back(mean[d] - kGaussianTruncation * stddev[d]);
    box.high.push_back(mean[d] + kGaussianTruncation * stddev[d]);
  }
  return DensitySpec(DiagGaussian{std::move(mean), std::move(stddev)}, std::move(box));
}

DensitySpec DensitySpec::from_parameters(Kind kind, std::size_t dim,
                                         std::span<const double> values) {
  auto expect = [&](std::size_t n) {
    if (values.size() != n) {
      throw std::invalid_argument("density parameters: expected " + std::to_string(n) +
                                  " values, got " + std::to_string(values.size()));
    }
  };
  switch (kind) {
    case Kind::Cosine2D:
      expect(0);
      return cosine();
    case Kind::Columns2D:
      expect(0);
      return columns();
    case Kind::RangeMsr3D:
      expect(0);
      return range_msr();
    case Kind::UniformBox: {
      expect(2 * dim);
      SupportBox box;
      for (std::size_t d = 0; d < dim; ++d) {
        box.low.push_back(values[2 * d]);
        box.high.push_back(values[2 * d + 1]);
      }
      return uniform_box(std::move(box));
    }
    case Kind::DiagGaussian: {
      expect(2 * dim);
      std::vector<double> mean, stddev;
      for (std::size_t d = 0; d < dim; ++d) {
        mean.push_back(values[2 * d]);
        stddev.push_back(values[2 * d + 1]);
      }
      return diag_gaussian(std::move(mean), std::move(stddev));
    }
  }
  throw std::invalid_argument("unknown density kind tag " +
                              std::to_string(static_cast<std::uint32_t>(kind)));
}

Kind DensitySpec::kind() const { return static_cast<Kind>(params_.index()); }

std::string DensitySpec::name() const {
  switch (kind()) {
    case Kind::Cosine2D:
      return "cosine";
    case Kind::Columns2D:
      return "columns";
    case Kind::RangeMsr3D:
      return "rangemsr";
    case Kind::UniformBox:
      return "uniform-box";
    case Kind::DiagGaussian:
      return "diag-gaussian";
  }
  return "unknown";
}

double DensitySpec::peak() const {
  return std::visit(
      Overloaded{
          [](const Cosine2D&) { return 2.0 / kCosineNormalizer; },
          [](const Columns2D&) {
            const double m = columns_marginal(0.0);
            return m * m;
          },
          [](const RangeMsr3D&) {
            return kInvSqrt2Pi / kRangeStd / (4.0 * kRangeXY * kRangeXY);
          },
          [](const UniformBox& u) { return 1.0 / u.box.volume(); },
          [](const DiagGaussian& g) {
            double p = 1.0;
            for (double s : g.stddev) p *= kInvSqrt2Pi / s;
            return p;
          },
      },
      params_);
}

std::vector<double> DensitySpec::parameters() const {
  std::vector<double> out;
  if (const auto* u = std::get_if<UniformBox>(&params_)) {
    for (std::size_t d = 0; d < u->box.dim(); ++d) {
      out.push_back(u->box.low[d]);
      out.push_back(u->box.high[d]);
    }
  } else if (const auto* g = std::get_if<DiagGaussian>(&params_)) {
    for (std::size_t d = 0; d < g->mean.size(); ++d) {
      out.push_back(g->mean[d]);
      out.push_back(g->stddev[d]);
    }
  }
  return out;
}

bool DensitySpec::operator==(const DensitySpec& other) const {
  return kind() == other.kind() && support_ == other.support_ &&
         parameters() == other.parameters();
}

double pdf_eval(const DensitySpec& spec, std::span<const double> x) {
  check_dim(spec, x.size());
  if (!spec.support().contains(x)) return 0.0;
  return std::visit(
      Overloaded{
          [&](const Cosine2D&) { return (std::cos(4.0 * x[0] * x[1]) + 1.0) / kCosineNormalizer; },
          [&](const Columns2D&) { return columns_marginal(x[0]) * columns_marginal(x[1]); },
          [&](const RangeMsr3D&) {
            const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
            const double uniform = 1.0 / (2.0 * kRangeXY);
            return uniform * uniform * normal_pdf(x[2], r, kRangeStd);
          },
          [&](const UniformBox& u) { return 1.0 / u.box.volume(); },
          [&](const DiagGaussian& g) {
            double p = 1.0;
            for (std::size_t d = 0; d < g.mean.size(); ++d) p *= normal_pdf(x[d], g.mean[d], g.stddev[d]);
            return p;
          },
      },
      spec.params());
}

Eigen::VectorXd pdf_eval_batch(const DensitySpec& spec, const nn::PointMatrix& points) {
  check_dim(spec, static_cast<std::size_t>(points.rows()));
  Eigen::VectorXd out(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    out[i] = pdf_eval(spec, std::span<const double>(points.col(i).data(), spec.dim()));
  }
  return out;
}

nn::PointMatrix sample_batch(const DensitySpec& spec, std::size_t count, RandomStream& stream) {
  if (count == 0) throw std::invalid_argument("sample_batch: count must be >= 1");
  nn::PointMatrix out(static_cast<Eigen::Index>(spec.dim()), static_cast<Eigen::Index>(count));
  sample_into(spec, stream, out);
  return out;
}

void sample_into(const DensitySpec& spec, RandomStream& stream, nn::PointMatrix& out) {
  check_dim(spec, static_cast<std::size_t>(out.rows()));
  for (Eigen::Index i = 0; i < out.cols(); ++i) draw_one(spec, stream, out.col(i).data());
}

DensitySpec proposal_for(const DensitySpec& target, double margin) {
  if (!std::isfinite(margin) || margin < 0.0) {
    throw std::invalid_argument("proposal margin must be finite and non-negative");
  }
  return DensitySpec::uniform_box(target.support().expanded(margin));
}

DensitySpec target_by_name(std::string_view name) {
  if (name == "cosine") return DensitySpec::cosine();
  if (name == "columns") return DensitySpec::columns();
  if (name == "rangemsr") return DensitySpec::range_msr();
  throw std::invalid_argument("unknown density '" + std::string(name) +
                              "' (expected cosine, columns, rangemsr or uniform-box)");
}

void verify_cosine_normalizer() {
  static const double integral = [] {
    // Composite Simpson on [-2, 2]^2.
    constexpr int kIntervals = 800;
    const double h = 4.0 / kIntervals;
    double sum = 0.0;
    for (int i = 0; i <= kIntervals; ++i) {
      const double wi = (i == 0 || i == kIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      const double x = -2.0 + i * h;
      for (int j = 0; j <= kIntervals; ++j) {
        const double wj = (j == 0 || j == kIntervals) ? 1.0 : (j % 2 ? 4.0 : 2.0);
        const double y = -2.0 + j * h;
        sum += wi * wj * (std::cos(4.0 * x * y) + 1.0);
      }
    }
    return sum * h * h / 9.0;
  }();
  if (std::abs(integral / kCosineNormalizer - 1.0) > 1e-3) {
    throw std::runtime_error("cosine normaliser does not match its [-2,2]^2 support box");
  }
}

}  // namespace psopdf::density
