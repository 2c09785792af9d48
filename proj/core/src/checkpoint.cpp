#include "nlsd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace nlsd {

namespace {

constexpr char kMagic[4] = {'N', 'L', 'S', 'D'};

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::string& buf, const std::string& s) {
  put_u32(buf, static_cast<std::uint32_t>(s.size()));
  buf.append(s);
}

void put_tensor(std::string& buf, const Tensor& t) {
  put_u32(buf, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) put_u32(buf, static_cast<std::uint32_t>(d));
  put_u64(buf, static_cast<std::uint64_t>(t.data.size()));
  for (double v : t.data) put_f64(buf, v);
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  Tensor tensor() {
    const std::uint32_t ndims = u32();
    if (ndims > 8) throw CheckpointError("checkpoint '" + path_ + "': implausible tensor rank");
    std::vector<int> shape(ndims);
    for (std::uint32_t i = 0; i < ndims; ++i) shape[i] = static_cast<int>(u32());
    const std::uint64_t numel = u64();
    if (numel != static_cast<std::uint64_t>(shape_numel(shape))) {
      throw CheckpointError("checkpoint '" + path_ + "': tensor size does not match its shape");
    }
    std::vector<double> data(numel);
    for (std::uint64_t i = 0; i < numel; ++i) data[i] = f64();
    return Tensor(std::move(shape), std::move(data));
  }

  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }

  void seek(std::size_t p) { pos_ = p; }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw CheckpointError("checkpoint '" + path_ + "': truncated file");
    }
  }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

void put_section(std::string& out, const std::string& payload) {
  put_u64(out, payload.size());
  out.append(payload);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  ckpt.config.validate();
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kCheckpointVersion);

  std::string sec;
  put_u32(sec, static_cast<std::uint32_t>(ckpt.config.in_channels));
  put_u32(sec, static_cast<std::uint32_t>(ckpt.config.kernel));
  put_u32(sec, static_cast<std::uint32_t>(ckpt.config.input_height));
  put_u32(sec, static_cast<std::uint32_t>(ckpt.config.input_width));
  put_u32(sec, static_cast<std::uint32_t>(ckpt.config.channels.size()));
  for (int c : ckpt.config.channels) put_u32(sec, static_cast<std::uint32_t>(c));
  for (int d : ckpt.config.dilations) put_u32(sec, static_cast<std::uint32_t>(d));
  put_section(out, sec);

  sec.clear();
  put_u32(sec, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const Tensor& t : ckpt.params) put_tensor(sec, t);
  put_section(out, sec);

  sec.clear();
  put_u32(sec, static_cast<std::uint32_t>(ckpt.optimizer.velocity.size()));
  for (const Tensor& t : ckpt.optimizer.velocity) put_tensor(sec, t);
  put_section(out, sec);

  sec.clear();
  put_u32(sec, static_cast<std::uint32_t>(ckpt.bank.variances.size()));
  for (const auto& [id, var] : ckpt.bank.variances) {
    put_string(sec, id);
    put_u32(sec, static_cast<std::uint32_t>(var.height));
    put_u32(sec, static_cast<std::uint32_t>(var.width));
    for (double v : var.values) put_f64(sec, v);
  }
  put_section(out, sec);

  sec.clear();
  put_u32(sec, static_cast<std::uint32_t>(ckpt.bank.round));
  put_u64(sec, ckpt.seed);
  put_section(out, sec);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("checkpoint '" + path + "': cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("checkpoint '" + path + "': write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint '" + path + "': cannot open");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r(bytes, path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("checkpoint '" + path + "': bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint '" + path + "': unsupported format version " +
                          std::to_string(version));
  }

  Checkpoint ckpt;
  auto enter_section = [&]() {
    const std::uint64_t len = r.u64();
    r.need(len);
    return r.pos() + len;
  };

  std::size_t end = enter_section();
  ckpt.config.in_channels = static_cast<int>(r.u32());
  ckpt.config.kernel = static_cast<int>(r.u32());
  ckpt.config.input_height = static_cast<int>(r.u32());
  ckpt.config.input_width = static_cast<int>(r.u32());
  const std::uint32_t n_stages = r.u32();
  ckpt.config.channels.resize(n_stages);
  for (std::uint32_t i = 0; i < n_stages; ++i) ckpt.config.channels[i] = static_cast<int>(r.u32());
  ckpt.config.dilations.resize(n_stages);
  for (std::uint32_t i = 0; i < n_stages; ++i) {
    ckpt.config.dilations[i] = static_cast<int>(r.u32());
  }
  if (r.pos() != end) throw CheckpointError("checkpoint '" + path + "': config section size off");

  end = enter_section();
  const std::uint32_t n_params = r.u32();
  ckpt.params.reserve(n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) ckpt.params.push_back(r.tensor());
  if (r.pos() != end) throw CheckpointError("checkpoint '" + path + "': params section size off");

  end = enter_section();
  const std::uint32_t n_vel = r.u32();
  ckpt.optimizer.velocity.reserve(n_vel);
  for (std::uint32_t i = 0; i < n_vel; ++i) ckpt.optimizer.velocity.push_back(r.tensor());
  if (r.pos() != end) {
    throw CheckpointError("checkpoint '" + path + "': optimizer section size off");
  }

  end = enter_section();
  const std::uint32_t n_maps = r.u32();
  for (std::uint32_t i = 0; i < n_maps; ++i) {
    std::string id = r.str();
    const int height = static_cast<int>(r.u32());
    const int width = static_cast<int>(r.u32());
    VarianceMap var(id, height, width);
    for (double& v : var.values) v = r.f64();
    ckpt.bank.variances.emplace(std::move(id), std::move(var));
  }
  if (r.pos() != end) {
    throw CheckpointError("checkpoint '" + path + "': variance section size off");
  }

  end = enter_section();
  ckpt.bank.round = static_cast<int>(r.u32());
  ckpt.seed = r.u64();
  if (r.pos() != end) {
    throw CheckpointError("checkpoint '" + path + "': counter section size off");
  }

  return ckpt;
}

}  // namespace nlsd
