#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dronerf/nerf.hpp"

namespace dronerf::nerf {

namespace {

constexpr char kMagic[8] = {'D', 'R', 'N', 'F', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const ParamLayout layout(ckpt.field);
  if (ckpt.params.size() != layout.total) throw std::invalid_argument("checkpoint parameters do not match the config");
  nlohmann::json header = {{"field", ckpt.field},
                           {"scene_box",
                            {{"center", {ckpt.box.center.x(), ckpt.box.center.y(), ckpt.box.center.z()}},
                             {"size", ckpt.box.size}}},
                           {"param_count", ckpt.params.size()},
                           {"dtype", "float32"},
                           {"extra", ckpt.extra}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, static_cast<uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(ckpt.params.data()),
            static_cast<std::streamsize>(ckpt.params.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  const auto version = get<uint32_t>(in);
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto length = get<uint64_t>(in);
  if (length > (uint64_t{1} << 30)) throw std::runtime_error("checkpoint header too large");
  std::string text(length, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw std::runtime_error("truncated checkpoint");
  const auto header = nlohmann::json::parse(text);

  Checkpoint ckpt;
  ckpt.field = header.at("field").get<FieldConfig>();
  const auto c = header.at("scene_box").at("center").get<std::vector<double>>();
  ckpt.box.center = Vec3(c.at(0), c.at(1), c.at(2));
  ckpt.box.size = header.at("scene_box").at("size").get<double>();
  ckpt.extra = header.value("extra", nlohmann::json::object());
  const size_t count = header.at("param_count").get<size_t>();
  if (count != ParamLayout(ckpt.field).total) throw std::runtime_error("checkpoint parameter count mismatch");
  ckpt.params.resize(count);
  if (!in.read(reinterpret_cast<char*>(ckpt.params.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
    throw std::runtime_error("truncated checkpoint");
  }
  return ckpt;
}

}  // namespace dronerf::nerf
