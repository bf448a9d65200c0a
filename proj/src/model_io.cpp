// Model file layout, all integers and reals little-endian:
//
//   8 bytes  magic "PSOPDF1\0"
//   u32      number of layer widths L (input, hidden..., output)
//   L x u32  widths; the last one must be 1
//   u32      proposal kind tag, followed by its parameters as f64
//            (uniform box: low/high per dimension; diagonal gaussian:
//            mean/stddev per dimension; fixed targets: none)
//   P x f64  theta in NetworkParams layout
//   16 bytes config digest

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "psopdf/trainer.hpp"

namespace psopdf::train {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'O', 'P', 'D', 'F', '1', '\0'};
constexpr std::uint32_t kMaxWidth = 1u << 20;
constexpr std::uint32_t kMaxLayers = 64;

class Writer {
public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  const std::vector<char>& buffer() const { return buffer_; }

private:
  std::vector<char> buffer_;
};

class Reader {
public:
  Reader(std::vector<char> data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  void bytes(void* out, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  bool at_end() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& why) const {
    throw ModelFormatError("malformed model file " + name_ + ": " + why);
  }

private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
  }

  std::vector<char> data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const PdfModel& model, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  const auto widths = model.params.topology().widths();
  w.u32(static_cast<std::uint32_t>(widths.size()));
  for (std::size_t width : widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(model.proposal.kind()));
  for (double v : model.proposal.parameters()) w.f64(v);
  for (double v : model.params.theta()) w.f64(v);
  w.bytes(model.config_hash.data(), model.config_hash.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw std::runtime_error("error writing model file " + path.string());
}

PdfModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());

  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("bad magic (not a PSOPDF1 model)");

  const std::uint32_t layer_count = r.u32("layer count");
  if (layer_count < 3 || layer_count > kMaxLayers) {
    r.fail("layer count " + std::to_string(layer_count) + " out of range");
  }
  std::vector<std::size_t> widths;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::uint32_t width = r.u32("layer widths");
    if (width == 0 || width > kMaxWidth) r.fail("layer width " + std::to_string(width) + " out of range");
    widths.push_back(width);
  }
  if (widths.back() != 1) r.fail("output width must be 1");
  nn::Topology topology{widths.front(), {widths.begin() + 1, widths.end() - 1}};

  const std::uint32_t tag = r.u32("proposal kind");
  if (tag > static_cast<std::uint32_t>(density::Kind::DiagGaussian)) {
    r.fail("unknown proposal kind tag " + std::to_string(tag));
  }
  const auto kind = static_cast<density::Kind>(tag);
  const std::size_t dim = topology.input_dim;
  const std::size_t param_values =
      (kind == density::Kind::UniformBox || kind == density::Kind::DiagGaussian) ? 2 * dim : 0;
  std::vector<double> proposal_params;
  for (std::size_t i = 0; i < param_values; ++i) proposal_params.push_back(r.f64("proposal parameters"));

  Eigen::VectorXd theta(static_cast<Eigen::Index>(topology.param_count()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    theta[i] = r.f64("theta");
    if (!std::isfinite(theta[i])) r.fail("non-finite theta entry");
  }
  ConfigDigest digest{};
  r.bytes(digest.data(), digest.size(), "config digest");
  if (!r.at_end()) r.fail("trailing bytes after config digest");

  try {
    density::DensitySpec proposal = density::DensitySpec::from_parameters(kind, dim, proposal_params);
    if (proposal.dim() != dim) r.fail("proposal dimension does not match network input");
    return PdfModel{nn::NetworkParams(topology, std::move(theta)), std::move(proposal), digest,
                    std::nan("")};
  } catch (const std::invalid_argument& e) {
    r.fail(e.what());
  }
}

}  // namespace psopdf::train
