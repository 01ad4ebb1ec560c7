#include "tvae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

namespace tvae {

namespace {

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_matrix_data(std::string& out, const Matrix& m) {
  for (double x : m.span()) put_f64(out, x);
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::uint16_t u16() {
    need(2);
    const auto* p = data();
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    need(4);
    const auto* p = data();
    pos_ += 4;
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    const auto* p = data();
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string blob(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  Matrix matrix(std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& x : m.span()) x = f64();
    return m;
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  const unsigned char* data() const {
    return reinterpret_cast<const unsigned char*>(bytes_.data()) + pos_;
  }
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw std::runtime_error(name_ + ": truncated checkpoint");
    }
  }
  const std::string& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.adam.m.size() != 2 * ckpt.layers.size() ||
      ckpt.adam.v.size() != 2 * ckpt.layers.size()) {
    throw std::invalid_argument("save_checkpoint: Adam state does not match layers");
  }
  std::string out;
  out += "TVAE";
  put_u16(out, 1);
  const std::string cfg_text = to_text(ckpt.config);
  put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out += cfg_text;
  put_u16(out, static_cast<std::uint16_t>(ckpt.layers.size()));
  for (const DenseLayer& layer : ckpt.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.weight.rows()));
    put_u32(out, static_cast<std::uint32_t>(layer.weight.cols()));
    put_matrix_data(out, layer.weight);
    put_matrix_data(out, layer.bias);
  }
  for (const Matrix& m : ckpt.adam.m) put_matrix_data(out, m);
  for (const Matrix& v : ckpt.adam.v) put_matrix_data(out, v);
  put_u64(out, ckpt.adam.t);
  put_f64(out, ckpt.best_val_loss);
  put_u64(out, ckpt.seed);

  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(file)),
                    std::istreambuf_iterator<char>());
  Reader reader(bytes, path.string());

  if (reader.blob(4) != "TVAE") {
    throw std::runtime_error(path.string() + ": bad checkpoint magic");
  }
  const std::uint16_t version = reader.u16();
  if (version != 1) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t cfg_len = reader.u32();
  ckpt.config = parse_config(reader.blob(cfg_len));

  const std::uint16_t layer_count = reader.u16();
  ckpt.layers.reserve(layer_count);
  for (std::uint16_t i = 0; i < layer_count; ++i) {
    const std::uint32_t rows = reader.u32();
    const std::uint32_t cols = reader.u32();
    DenseLayer layer;
    layer.weight = reader.matrix(rows, cols);
    layer.bias = reader.matrix(1, cols);
    ckpt.layers.push_back(std::move(layer));
  }
  for (const DenseLayer& layer : ckpt.layers) {
    ckpt.adam.m.push_back(reader.matrix(layer.weight.rows(), layer.weight.cols()));
    ckpt.adam.m.push_back(reader.matrix(1, layer.bias.cols()));
  }
  for (const DenseLayer& layer : ckpt.layers) {
    ckpt.adam.v.push_back(reader.matrix(layer.weight.rows(), layer.weight.cols()));
    ckpt.adam.v.push_back(reader.matrix(1, layer.bias.cols()));
  }
  ckpt.adam.t = reader.u64();
  ckpt.best_val_loss = reader.f64();
  ckpt.seed = reader.u64();
  if (!reader.exhausted()) {
    throw std::runtime_error(path.string() + ": trailing bytes in checkpoint");
  }
  return ckpt;
}

}  // namespace tvae
