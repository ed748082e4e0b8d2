#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mantra/errors.hpp"
#include "mantra/training.hpp"

namespace mantra {
namespace {

constexpr std::string_view kMagic = "MANTRACK";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct NamedTensor {
  std::string name;
  const Matrix* tensor;
};

void collect(const Model& model, const std::string& prefix, std::vector<NamedTensor>& out) {
  model.visit(ConstTensorVisitor([&](const std::string& n, const Matrix& m) { out.push_back({prefix + n, &m}); }));
}

std::map<std::string, Matrix*> index(Model& model, const std::string& prefix) {
  std::map<std::string, Matrix*> out;
  model.visit(TensorVisitor([&](const std::string& n, Matrix& m) { out[prefix + n] = &m; }));
  return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path, TensorPrecision precision) {
  const ModelState& state = checkpoint.state;
  const TextEncoder& enc = *state.encoder;

  std::vector<NamedTensor> tensors;
  collect(state.model, "model.", tensors);
  collect(checkpoint.optimizer.first_moment(), "adam.m.", tensors);
  collect(checkpoint.optimizer.second_moment(), "adam.v.", tensors);
  tensors.push_back({"encoder.table", &enc.table().rows()});
  tensors.push_back({"encoder.buckets", &enc.table().buckets()});
  tensors.push_back({"encoder.weight", &enc.composition().weight});
  tensors.push_back({"encoder.bias", &enc.composition().bias});

  const bool f32 = precision == TensorPrecision::F32;
  const std::size_t width = f32 ? sizeof(float) : sizeof(double);
  nlohmann::json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = nlohmann::json::parse(state.config.to_json());
  header["vocabulary"] = nlohmann::json::parse(state.vocabulary.to_json());
  header["epoch"] = state.epoch;
  header["rng_state"] = checkpoint.rng_state;
  header["optimizer"] = {{"steps", checkpoint.optimizer.steps()}};
  header["encoder"] = {{"kind", to_string(enc.spec().kind)},
                       {"seed", enc.spec().seed},
                       {"frozen", enc.composition().frozen},
                       {"words", enc.table().words()}};
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    header["tensors"].push_back({{"name", t.name},
                                 {"rows", t.tensor->rows()},
                                 {"cols", t.tensor->cols()},
                                 {"dtype", f32 ? "f32" : "f64"},
                                 {"offset", offset}});
    offset += static_cast<std::size_t>(t.tensor->size()) * width;
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  // Row-major element order.
  for (const auto& t : tensors) {
    for (Eigen::Index r = 0; r < t.tensor->rows(); ++r)
      for (Eigen::Index c = 0; c < t.tensor->cols(); ++c) {
        if (f32) {
          const float v = static_cast<float>((*t.tensor)(r, c));
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        } else {
          const double v = (*t.tensor)(r, c);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      }
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  const std::size_t fixed = kMagic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < fixed || bytes.compare(0, kMagic.size(), kMagic) != 0)
    fail(ErrorCode::ParseError, path.string() + ": not a mantra checkpoint");
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, bytes.data() + kMagic.size(), sizeof(version));
  std::memcpy(&header_len, bytes.data() + kMagic.size() + sizeof(version), sizeof(header_len));
  if (version == 0) fail(ErrorCode::ParseError, path.string() + ": bad checkpoint version 0");
  if (version > kCheckpointVersion)
    fail(ErrorCode::VersionMismatch, path.string() + ": checkpoint version " + std::to_string(version) +
                                         " is newer than supported " + std::to_string(kCheckpointVersion));
  if (header_len > bytes.size() - fixed) fail(ErrorCode::ParseError, path.string() + ": truncated header");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(fixed, header_len));
    const std::size_t data_start = fixed + header_len;

    std::map<std::string, Matrix> loaded;
    for (const auto& t : header.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>();
      const auto cols = t.at("cols").get<Eigen::Index>();
      const auto dtype = t.at("dtype").get<std::string>();
      const auto offset = t.at("offset").get<std::size_t>();
      if (dtype != "f32" && dtype != "f64") fail(ErrorCode::ParseError, "unknown tensor dtype " + dtype);
      const std::size_t width = dtype == "f32" ? sizeof(float) : sizeof(double);
      const std::size_t count = static_cast<std::size_t>(rows * cols);
      if (rows < 0 || cols < 0 || data_start + offset + count * width > bytes.size())
        fail(ErrorCode::ParseError, "tensor " + t.at("name").get<std::string>() + " out of bounds");
      Matrix m(rows, cols);
      const char* p = bytes.data() + data_start + offset;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c, p += width) {
          if (width == sizeof(float)) {
            float v;
            std::memcpy(&v, p, sizeof(v));
            m(r, c) = v;
          } else {
            double v;
            std::memcpy(&v, p, sizeof(v));
            m(r, c) = v;
          }
        }
      loaded.emplace(t.at("name").get<std::string>(), std::move(m));
    }
    auto take = [&](const std::string& name) -> Matrix {
      auto it = loaded.find(name);
      if (it == loaded.end()) fail(ErrorCode::ParseError, "checkpoint lacks tensor " + name);
      return it->second;
    };

    const TrainConfig config = TrainConfig::from_json(header.at("config").dump());
    const auto& enc = header.at("encoder");
    if (!enc.value("frozen", true)) fail(ErrorCode::ParseError, "checkpoint encoder is not frozen");
    EncoderSpec spec = config.model.encoder;
    CompositionParams comp{take("encoder.weight"), take("encoder.bias"), true};
    auto table = EmbeddingTable::from_rows(enc.at("words").get<std::vector<std::string>>(), take("encoder.table"),
                                           take("encoder.buckets"));

    ModelState& state = ck.state;
    state.config = config;
    state.encoder = std::make_shared<const TextEncoder>(std::move(table), std::move(comp), spec);
    state.vocabulary = UnifiedVocabulary::from_json(header.at("vocabulary").dump());
    state.epoch = header.at("epoch").get<int>();
    Rng shape_rng(0);
    state.model = Model::init(config.model, state.encoder->token_dim(), shape_rng);

    ck.optimizer = AdamW(state.model, config.beta1, config.beta2, config.eps, config.weight_decay);
    ck.optimizer.set_steps(header.at("optimizer").at("steps").get<std::int64_t>());
    for (auto& [prefix, target] : std::vector<std::pair<std::string, Model*>>{
             {"model.", &state.model}, {"adam.m.", &ck.optimizer.first_moment()}, {"adam.v.", &ck.optimizer.second_moment()}}) {
      for (auto& [name, tensor] : index(*target, prefix)) {
        Matrix m = take(name);
        if (m.rows() != tensor->rows() || m.cols() != tensor->cols())
          fail(ErrorCode::DimensionMismatch, "tensor " + name + " has shape " + std::to_string(m.rows()) + "x" +
                                                 std::to_string(m.cols()) + ", config expects " +
                                                 std::to_string(tensor->rows()) + "x" + std::to_string(tensor->cols()));
        *tensor = std::move(m);
      }
    }
    ck.rng_state = header.at("rng_state").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace mantra
