#include "contextstrip/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "contextstrip/core/error.hpp"

namespace cstrip {

namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "contextstrip-checkpoint";

nlohmann::json read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  try {
    nlohmann::json j = nlohmann::json::parse(is);
    if (j.value("format", std::string()) != kFormatName) {
      throw FormatError("'" + path.string() + "' is not a checkpoint manifest");
    }
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw FormatError("'" + path.string() + "' has unsupported format version " +
                        j.at("format_version").dump());
    }
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

template <typename Dtype>
void append_values(std::vector<char>& blob, std::span<const Dtype> values) {
  const std::size_t offset = blob.size();
  blob.resize(offset + values.size() * sizeof(Dtype));
  std::memcpy(blob.data() + offset, values.data(), values.size() * sizeof(Dtype));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      char* p = blob.data() + offset + i * sizeof(Dtype);
      std::reverse(p, p + sizeof(Dtype));
    }
  }
}

template <typename Dtype>
void read_values(const std::vector<char>& blob, std::size_t& offset, std::span<Dtype> out) {
  std::memcpy(out.data(), blob.data() + offset, out.size() * sizeof(Dtype));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : out) {
      auto* p = reinterpret_cast<char*>(&v);
      std::reverse(p, p + sizeof(Dtype));
    }
  }
  offset += out.size() * sizeof(Dtype);
}

}  // namespace

template <>
std::string precision_tag<float>() {
  return "float32";
}
template <>
std::string precision_tag<double>() {
  return "float64";
}

std::string checkpoint_precision(const fs::path& dir) {
  const auto j = read_manifest(dir);
  const auto tag = j.at("precision").get<std::string>();
  if (tag != "float32" && tag != "float64") {
    throw FormatError("checkpoint '" + dir.string() + "' has unknown precision tag '" + tag + "'");
  }
  return tag;
}

template <typename Dtype>
void save_checkpoint(const TrainState<Dtype>& state, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<char> blob;
  for (const auto& e : state.params.entries()) {
    tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"trainable", e.trainable}});
    append_values<Dtype>(blob, e.tensor.data());
  }
  std::int64_t velocity_values = 0;
  for (const auto& v : state.velocity) {
    velocity_values += v.numel();
    append_values<Dtype>(blob, v.data());
  }
  nlohmann::json rng_state = nlohmann::json::array();
  for (auto word : state.rng_state) rng_state.push_back(word);

  nlohmann::json manifest{{"format", kFormatName},
                          {"format_version", kFormatVersion},
                          {"code_version", CONTEXTSTRIP_VERSION},
                          {"precision", precision_tag<Dtype>()},
                          {"seed", state.cfg.seed},
                          {"arch", state.cfg.arch},
                          {"train", state.cfg},
                          {"step", state.step},
                          {"total_steps", state.total_steps},
                          {"epoch", state.epoch},
                          {"rng_state", rng_state},
                          {"history", state.history},
                          {"dataset", state.dataset_name},
                          {"tensors", tensors},
                          {"velocity_values", velocity_values},
                          {"blob_bytes", blob.size()}};
  {
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os) throw IoError("cannot write '" + (dir / "manifest.json").string() + "'");
    os << manifest.dump(2) << '\n';
  }
  std::ofstream os(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + (dir / "params.bin").string() + "'");
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!os) throw IoError("short write to '" + (dir / "params.bin").string() + "'");
}

template <typename Dtype>
TrainState<Dtype> load_checkpoint(const fs::path& dir) {
  const auto tag = checkpoint_precision(dir);
  if (tag != precision_tag<Dtype>()) {
    throw FormatError("checkpoint '" + dir.string() + "' stores " + tag + ", " +
                      precision_tag<Dtype>() + " was requested");
  }
  const auto manifest = read_manifest(dir);
  std::ifstream is(dir / "params.bin", std::ios::binary);
  if (!is) throw IoError("cannot open '" + (dir / "params.bin").string() + "'");
  const std::vector<char> blob{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};

  TrainState<Dtype> state;
  try {
    manifest.at("train").get_to(state.cfg);
    state.step = manifest.at("step").get<std::int64_t>();
    state.total_steps = manifest.at("total_steps").get<std::int64_t>();
    state.epoch = manifest.at("epoch").get<int>();
    const auto& words = manifest.at("rng_state");
    if (words.size() != state.rng_state.size()) throw FormatError("rng_state has the wrong length");
    for (std::size_t i = 0; i < state.rng_state.size(); ++i) {
      state.rng_state[i] = words[i].get<std::uint64_t>();
    }
    state.history = manifest.at("history").get<std::vector<EpochRecord>>();
    state.dataset_name = manifest.at("dataset").get<std::string>();

    std::size_t expected = 0;
    std::vector<std::pair<std::string, Shape>> shapes;
    std::vector<bool> trainable;
    for (const auto& t : manifest.at("tensors")) {
      Shape shape = t.at("shape").get<Shape>();
      std::int64_t count = 1;
      for (auto d : shape) count *= d;
      expected += static_cast<std::size_t>(count) * sizeof(Dtype);
      shapes.emplace_back(t.at("name").get<std::string>(), std::move(shape));
      trainable.push_back(t.at("trainable").get<bool>());
    }
    const auto velocity_values = manifest.at("velocity_values").get<std::int64_t>();
    expected += static_cast<std::size_t>(velocity_values) * sizeof(Dtype);
    if (blob.size() != expected) {
      throw FormatError("checkpoint '" + dir.string() + "': params.bin holds " +
                        std::to_string(blob.size()) + " bytes, the manifest describes " +
                        std::to_string(expected));
    }
    std::size_t offset = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      Tensor<Dtype> t(shapes[i].second);
      read_values<Dtype>(blob, offset, t.mutable_data());
      state.params.add(shapes[i].first, t, trainable[i]);
    }
    std::int64_t restored = 0;
    for (const auto& e : state.params.entries()) {
      if (!e.trainable) continue;
      Tensor<Dtype> v(e.tensor.shape());
      restored += v.numel();
      if (restored > velocity_values) break;
      read_values<Dtype>(blob, offset, v.mutable_data());
      state.velocity.push_back(v);
    }
    if (restored != velocity_values) {
      throw FormatError("checkpoint '" + dir.string() +
                        "': momentum buffers do not match the trainable parameters");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint '" + dir.string() + "': " + e.what());
  }
  return state;
}

template void save_checkpoint(const TrainState<float>&, const fs::path&);
template void save_checkpoint(const TrainState<double>&, const fs::path&);
template TrainState<float> load_checkpoint<float>(const fs::path&);
template TrainState<double> load_checkpoint<double>(const fs::path&);

}  // namespace cstrip
