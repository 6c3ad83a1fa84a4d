#include "sparselab/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

namespace sparselab {

static_assert(std::endian::native == std::endian::little,
              "container payloads are written as host doubles and documented little-endian");

void write_container(const std::filesystem::path& path, const char magic[8],
                     const nlohmann::json& header, const std::vector<unsigned char>& payload) {
  const std::string header_text = header.dump();
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
  if (f == nullptr) throw DataError("cannot write " + path.string());
  bool ok = std::fwrite(magic, 1, 8, f) == 8;
  const std::uint64_t len = header_text.size();
  unsigned char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<unsigned char>(len >> (8 * i));
  ok = ok && std::fwrite(len_bytes, 1, 8, f) == 8;
  ok = ok && std::fwrite(header_text.data(), 1, header_text.size(), f) == header_text.size();
  ok = ok && (payload.empty() || std::fwrite(payload.data(), 1, payload.size(), f) == payload.size());
  std::fclose(f);
  if (!ok) throw DataError("short write to " + path.string());
  std::filesystem::rename(tmp, path);
}

std::pair<nlohmann::json, std::vector<unsigned char>> read_container(
    const std::filesystem::path& path, const char magic[8]) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (f == nullptr) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) bytes.insert(bytes.end(), buf, buf + n);
  std::fclose(f);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), magic, 8) != 0) {
    throw DataError("bad magic in " + path.string());
  }
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | bytes[8 + i];
  if (16 + len > bytes.size()) throw DataError("truncated container " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + len);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad container header in " + path.string() + ": " + e.what());
  }
  return {std::move(header),
          std::vector<unsigned char>(bytes.begin() + 16 + len, bytes.end())};
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'L', 'C', 'K', 'P', 'T', '0', '1'};

void append_doubles(std::vector<unsigned char>& payload, const Tensor& t) {
  const auto* raw = reinterpret_cast<const unsigned char*>(t.data());
  payload.insert(payload.end(), raw, raw + t.size() * sizeof(double));
}

void read_doubles(const std::vector<unsigned char>& payload, std::size_t& offset, Tensor& t,
                  const std::filesystem::path& path) {
  const std::size_t bytes = t.size() * sizeof(double);
  if (offset + bytes > payload.size()) throw DataError("truncated checkpoint " + path.string());
  std::memcpy(t.data(), payload.data() + offset, bytes);
  offset += bytes;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const nlohmann::json& meta) {
  net.validate();
  nlohmann::json header;
  header["kind"] = "network-checkpoint";
  header["layers"] = nlohmann::json::array();
  std::vector<unsigned char> payload;
  for (const Layer& layer : net.layers) {
    header["layers"].push_back({
        {"fan_in", layer.fan_in()},
        {"fan_out", layer.fan_out()},
        {"activation", layer.activation == Activation::Relu ? "relu" : "identity"},
        {"parameterisation", layer.is_powerprop() ? "powerprop" : "plain"},
        {"alpha", layer.alpha},
    });
    append_doubles(payload, layer.weight);
    append_doubles(payload, layer.bias);
  }
  header["meta"] = meta;
  write_container(path, kCheckpointMagic, header, payload);
}

Network load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta_out) {
  auto [header, payload] = read_container(path, kCheckpointMagic);
  if (header.value("kind", "") != "network-checkpoint") {
    throw DataError("not a network checkpoint: " + path.string());
  }
  Network net;
  std::size_t offset = 0;
  for (const auto& jlayer : header.at("layers")) {
    Layer layer;
    const auto fan_in = jlayer.at("fan_in").get<std::size_t>();
    const auto fan_out = jlayer.at("fan_out").get<std::size_t>();
    layer.weight = Tensor::zeros(fan_in, fan_out);
    layer.bias = Tensor::zeros(fan_out);
    layer.activation =
        jlayer.at("activation").get<std::string>() == "relu" ? Activation::Relu
                                                             : Activation::Identity;
    layer.parameterisation = jlayer.at("parameterisation").get<std::string>() == "powerprop"
                                 ? Parameterisation::Powerprop
                                 : Parameterisation::Plain;
    layer.alpha = jlayer.at("alpha").get<double>();
    read_doubles(payload, offset, layer.weight, path);
    read_doubles(payload, offset, layer.bias, path);
    net.layers.push_back(std::move(layer));
  }
  if (offset != payload.size()) throw DataError("trailing bytes in checkpoint " + path.string());
  if (meta_out != nullptr) *meta_out = header.value("meta", nlohmann::json::object());
  net.validate();
  return net;
}

}  // namespace sparselab
