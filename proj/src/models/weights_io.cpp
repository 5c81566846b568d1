// Weight file layout (little-endian):
//   "DMXW" | u32 version | u32 arch | u64 seed | u32 ndims | u64 dims[ndims]
//   | u32 nblocks | f64 values of each block in declaration order

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "demux/errors.hpp"
#include "demux/training.hpp"

namespace demux::models {
namespace {

constexpr std::array<char, 4> kMagic{'D', 'M', 'X', 'W'};
constexpr std::uint32_t kMaxDims = 16;

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  std::uint64_t bits = 0;
  if constexpr (std::is_same_v<T, double>) bits = std::bit_cast<std::uint64_t>(value);
  else bits = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw WeightFileError(WeightFileError::Kind::Corrupt, path_ + ": truncated weight file");
    }
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, double>) return std::bit_cast<double>(bits);
    else return static_cast<T>(bits);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_weights(const Classifier& model, const std::filesystem::path& path) {
  std::vector<unsigned char> out(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(out, kWeightFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.architecture()));
  put<std::uint64_t>(out, model.seed());
  const auto dims = model.dims();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint64_t>(out, d);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& block : model.parameters()) {
    for (double v : block.value.values()) put<double>(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WeightFileError(WeightFileError::Kind::Io, "cannot write weight file " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw WeightFileError(WeightFileError::Kind::Io, "write failed for " + path.string());
}

std::unique_ptr<Classifier> load_weights(const std::filesystem::path& path, const WeightExpectation& expect) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw WeightFileError(WeightFileError::Kind::Io, "cannot open weight file " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string name = path.string();

  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw WeightFileError(WeightFileError::Kind::Corrupt, name + ": not a DMXW weight file");
  }
  std::vector<unsigned char> body(bytes.begin() + kMagic.size(), bytes.end());
  Reader r(body, name);
  const auto version = r.get<std::uint32_t>();
  if (version != kWeightFormatVersion) {
    throw WeightFileError(WeightFileError::Kind::VersionMismatch,
                          name + ": format version " + std::to_string(version) + ", this build reads version " +
                              std::to_string(kWeightFormatVersion));
  }
  const auto arch_tag = r.get<std::uint32_t>();
  if (arch_tag != static_cast<std::uint32_t>(Architecture::Fcn) &&
      arch_tag != static_cast<std::uint32_t>(Architecture::Gru)) {
    throw WeightFileError(WeightFileError::Kind::Corrupt, name + ": unknown architecture tag " + std::to_string(arch_tag));
  }
  const auto arch = static_cast<Architecture>(arch_tag);
  if (expect.architecture && *expect.architecture != arch) {
    throw WeightFileError(WeightFileError::Kind::ArchitectureMismatch,
                          name + ": holds a " + to_string(arch) + " model, expected " + to_string(*expect.architecture));
  }
  const auto seed = r.get<std::uint64_t>();
  const auto ndims = r.get<std::uint32_t>();
  if (ndims == 0 || ndims > kMaxDims) throw WeightFileError(WeightFileError::Kind::Corrupt, name + ": bad dimension count");
  std::vector<std::uint64_t> dims(ndims);
  for (auto& d : dims) d = r.get<std::uint64_t>();
  const auto nblocks = r.get<std::uint32_t>();

  std::unique_ptr<Classifier> model;
  try {
    model = make_classifier(arch, dims, seed);
  } catch (const ShapeError& e) {
    throw WeightFileError(WeightFileError::Kind::Corrupt, name + ": " + e.what());
  }
  if (nblocks != model->parameters().size() || r.remaining() != model->parameter_count() * sizeof(double)) {
    throw WeightFileError(WeightFileError::Kind::Corrupt, name + ": parameter payload does not match declared dims");
  }
  if (expect.series_length && *expect.series_length != model->series_length()) {
    throw WeightFileError(WeightFileError::Kind::DimensionMismatch,
                          name + ": model input length " + std::to_string(model->series_length()) + ", expected " +
                              std::to_string(*expect.series_length));
  }
  if (expect.num_classes && *expect.num_classes != model->num_classes()) {
    throw WeightFileError(WeightFileError::Kind::DimensionMismatch,
                          name + ": model has " + std::to_string(model->num_classes()) + " classes, expected " +
                              std::to_string(*expect.num_classes));
  }
  for (auto& block : model->parameters()) {
    std::vector<double> values(block.value.size());
    for (auto& v : values) v = r.get<double>();
    block.value = ad::Tensor(block.value.shape(), std::move(values));
  }
  return model;
}

}  // namespace demux::models
