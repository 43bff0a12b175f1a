#include "gridrl/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "gridrl/errors.hpp"

namespace gridrl {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

void put_tensor(std::string& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
  std::size_t count = 1;
  for (std::uint32_t d : t.dims) {
    put_u32(out, d);
    count *= d;
  }
  if (count != t.data.size()) throw IoError("tensor dim/data mismatch");
  for (float v : t.data) put_f32(out, v);
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw IoError("truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string str(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("truncated checkpoint");
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

void write_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename to '" + path + "' failed: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return bytes;
}

Tensor vec_tensor(const std::vector<float>& v) {
  return Tensor{{static_cast<std::uint32_t>(v.size())}, v};
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const AdamState* opt_state) {
  validate_params(params);
  std::string out;
  out.append(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);

  std::vector<std::pair<std::string, Tensor>> tensors;
  const PolicyMeta& m = params.meta;
  tensors.emplace_back(
      "meta", Tensor{{4},
                     {static_cast<float>(m.input_dim),
                      static_cast<float>(m.hidden_dim),
                      static_cast<float>(m.chunk_size),
                      static_cast<float>(m.vocab_size)}});
  const auto layer_tensors = [&](const std::string& prefix,
                                 const LinearLayer& layer) {
    tensors.emplace_back(prefix + "/weight",
                         Tensor{{static_cast<std::uint32_t>(layer.out),
                                 static_cast<std::uint32_t>(layer.in)},
                                layer.weight});
    tensors.emplace_back(prefix + "/bias",
                         Tensor{{static_cast<std::uint32_t>(layer.out)},
                                layer.bias});
  };
  layer_tensors("layers/0", params.hidden0);
  layer_tensors("layers/1", params.hidden1);
  layer_tensors("head", params.head);
  if (opt_state != nullptr) {
    tensors.emplace_back("opt/m", vec_tensor(opt_state->m));
    tensors.emplace_back("opt/v", vec_tensor(opt_state->v));
    tensors.emplace_back(
        "opt/step",
        Tensor{{1}, {static_cast<float>(opt_state->step)}});
  }

  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) put_tensor(out, name, tensor);
  write_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader reader(read_file(path));
  if (reader.str(4) != std::string(kCheckpointMagic, 4)) {
    throw IoError("'" + path + "' is not a checkpoint file");
  }
  const std::uint32_t version = reader.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = reader.u32();
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = reader.u32();
    std::string name = reader.str(name_len);
    Tensor t;
    const std::uint32_t rank = reader.u32();
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(reader.u32());
      n *= t.dims.back();
    }
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) t.data[k] = reader.f32();
    tensors.emplace(std::move(name), std::move(t));
  }
  if (!reader.at_end()) throw IoError("trailing bytes in '" + path + "'");

  const auto require = [&](const std::string& name) -> const Tensor& {
    const auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw IoError("checkpoint missing tensor '" + name + "'");
    }
    return it->second;
  };

  const Tensor& meta = require("meta");
  if (meta.data.size() != 4) throw IoError("malformed meta tensor");
  Checkpoint ck;
  ck.params.meta.input_dim = static_cast<int>(meta.data[0]);
  ck.params.meta.hidden_dim = static_cast<int>(meta.data[1]);
  ck.params.meta.chunk_size = static_cast<int>(meta.data[2]);
  ck.params.meta.vocab_size = static_cast<int>(meta.data[3]);

  const auto load_layer = [&](const std::string& prefix, LinearLayer& layer,
                              int out_dim, int in_dim) {
    const Tensor& w = require(prefix + "/weight");
    const Tensor& b = require(prefix + "/bias");
    if (w.dims.size() != 2 || static_cast<int>(w.dims[0]) != out_dim ||
        static_cast<int>(w.dims[1]) != in_dim ||
        b.data.size() != static_cast<std::size_t>(out_dim)) {
      throw IoError("tensor '" + prefix + "' has inconsistent dimensions");
    }
    layer.out = out_dim;
    layer.in = in_dim;
    layer.weight = w.data;
    layer.bias = b.data;
  };
  const PolicyMeta& m = ck.params.meta;
  load_layer("layers/0", ck.params.hidden0, m.hidden_dim, m.input_dim);
  load_layer("layers/1", ck.params.hidden1, m.hidden_dim, m.hidden_dim);
  load_layer("head", ck.params.head, m.chunk_size * m.vocab_size,
             m.hidden_dim);
  validate_params(ck.params);

  if (tensors.count("opt/m") != 0) {
    AdamState opt;
    opt.m = require("opt/m").data;
    opt.v = require("opt/v").data;
    opt.step = static_cast<std::int64_t>(require("opt/step").data.at(0));
    const std::size_t total = param_layout(m).total;
    if (opt.m.size() != total || opt.v.size() != total) {
      throw IoError("optimizer state size mismatch");
    }
    ck.opt_state = std::move(opt);
  }
  return ck;
}

}  // namespace gridrl
