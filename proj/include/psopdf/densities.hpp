#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "psopdf/nn.hpp"
#include "psopdf/random.hpp"

namespace psopdf::density {

/// Normaliser of the Cosine density on [-2, 2]^2.
inline constexpr double kCosineNormalizer = 17.631302268269998;

/// Axis-aligned box, one [low, high] interval per dimension.
struct SupportBox {
  std::vector<double> low;
  std::vector<double> high;

  std::size_t dim() const { return low.size(); }
  double volume() const;
  bool contains(std::span<const double> x) const;
  SupportBox expanded(double margin) const;
  /// Throws std::invalid_argument unless low < high in every dimension.
  void validate() const;

  bool operator==(const SupportBox&) const = default;
};

enum class Kind : std::uint32_t {
  Cosine2D = 0,
  Columns2D = 1,
  RangeMsr3D = 2,
  UniformBox = 3,
  DiagGaussian = 4,
};

struct Cosine2D {};
struct Columns2D {};
struct RangeMsr3D {};
struct UniformBox {
  SupportBox box;
};
/// Diagonal Gaussian truncated to mean +- 8 standard deviations.
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// An analytic density: exact pdf, exact sampler and a finite support box
/// outside of which the pdf is zero.
class DensitySpec {
public:
  using Params = std::variant<Cosine2D, Columns2D, RangeMsr3D, UniformBox, DiagGaussian>;

  static DensitySpec cosine();
  static DensitySpec columns();
  static DensitySpec range_msr();
  static DensitySpec uniform_box(SupportBox box);
  static DensitySpec diag_gaussian(std::vector<double> mean, std::vector<double> stddev);

  /// Rebuilds a density from a serialized kind tag and its flat parameters.
  static DensitySpec from_parameters(Kind kind, std::size_t dim, std::span<const double> values);

  Kind kind() const;
  const Params& params() const { return params_; }
  std::size_t dim() const { return support_.dim(); }
  const SupportBox& support() const { return support_; }
  std::string name() const;
  /// Maximum of the pdf over its support.
  double peak() const;
  /// Flat parameters as written to model files (empty for the fixed targets).
  std::vector<double> parameters() const;

  bool operator==(const DensitySpec& other) const;

private:
  DensitySpec(Params params, SupportBox support);

  Params params_;
  SupportBox support_;
};

double pdf_eval(const DensitySpec& spec, std::span<const double> x);

/// pdf_eval at every column of points.
Eigen::VectorXd pdf_eval_batch(const DensitySpec& spec, const nn::PointMatrix& points);

/// count i.i.d. draws, one per column. Throws if count == 0.
nn::PointMatrix sample_batch(const DensitySpec& spec, std::size_t count, RandomStream& stream);

/// Fills every column of out with a draw.
void sample_into(const DensitySpec& spec, RandomStream& stream, nn::PointMatrix& out);

/// Uniform density on the target's support box grown by margin on each side.
DensitySpec proposal_for(const DensitySpec& target, double margin);

/// "cosine", "columns", "rangemsr"; "uniform-box" needs explicit bounds and
/// is built with uniform_box().
DensitySpec target_by_name(std::string_view name);

/// Simpson-rule check of the Cosine normaliser on its box; throws
/// std::runtime_error when the relative mismatch exceeds 1e-3.
void verify_cosine_normalizer();

}  // namespace psopdf::density
