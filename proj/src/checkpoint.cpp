#include "futurelm/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "futurelm/errors.hpp"

namespace flm {
namespace {

constexpr std::array<char, 8> kMagic = {'F', 'L', 'M', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(std::string_view s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void shape(const Tensor& t) {
    pod(std::uint32_t{2});
    pod(static_cast<std::uint64_t>(t.rows()));
    pod(static_cast<std::uint64_t>(t.cols()));
  }
  void payload(const Tensor& t) {
    out_.write(reinterpret_cast<const char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) fail("truncated file");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail("truncated string");
    return s;
  }
  Tensor shaped() {
    const auto ndim = pod<std::uint32_t>();
    if (ndim == 0 || ndim > 2) fail("unsupported tensor rank " + std::to_string(ndim));
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t i = 0; i < ndim; ++i) dims[i] = pod<std::uint64_t>();
    if (ndim == 1) std::swap(dims[0], dims[1]);
    return Tensor(dims[0], dims[1]);
  }
  void payload(Tensor& t) {
    in_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in_) fail("truncated tensor payload");
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw ContractError("checkpoint '" + path_ + "': " + why);
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

const Tensor& Checkpoint::tensor(std::string_view name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw ContractError("checkpoint has no tensor named '" + std::string(name) + "'");
}

void Checkpoint::load_into(ParameterSet& params, std::string_view prefix) const {
  for (auto& p : params) {
    const auto& t = tensor(std::string(prefix) + p.name);
    if (!t.same_shape(p.value)) {
      throw DimensionError("checkpoint tensor '" + std::string(prefix) + p.name + "' has shape " +
                           t.shape_string() + ", model expects " + p.value.shape_string());
    }
    p.value = t;
  }
}

void Checkpoint::add_parameters(const ParameterSet& params, std::string_view prefix) {
  for (const auto& p : params) tensors.emplace_back(std::string(prefix) + p.name, p.value);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.pod(kCheckpointVersion);
  const std::string meta = ckpt.metadata.dump();
  w.pod(static_cast<std::uint64_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  w.pod(static_cast<std::uint64_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.str(name);
    w.shape(t);
    w.payload(t);
  }
  w.pod(static_cast<std::uint8_t>(ckpt.optimizer.has_value()));
  if (ckpt.optimizer) {
    const auto& s = *ckpt.optimizer;
    w.pod(s.step);
    w.pod(s.lr);
    w.pod(s.beta1);
    w.pod(s.beta2);
    w.pod(s.eps);
    std::vector<std::string> names;
    for (const auto& [n, _] : s.moments) names.push_back(n);
    std::sort(names.begin(), names.end());
    w.pod(static_cast<std::uint64_t>(names.size()));
    for (const auto& n : names) {
      const auto& m = s.moments.at(n);
      w.str(n);
      w.shape(m.first);
      w.payload(m.first);
      w.payload(m.second);
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  Reader r(in, path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) r.fail("not a checkpoint file (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("format version " + std::to_string(version) + " is not supported (expected " +
           std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  const auto meta_len = r.pod<std::uint64_t>();
  std::string meta(meta_len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!in) r.fail("truncated metadata");
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("corrupt metadata: ") + e.what());
  }
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = r.str();
    Tensor t = r.shaped();
    r.payload(t);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.pod<std::uint8_t>() != 0) {
    AdamState s;
    s.step = r.pod<std::uint64_t>();
    s.lr = r.pod<double>();
    s.beta1 = r.pod<double>();
    s.beta2 = r.pod<double>();
    s.eps = r.pod<double>();
    const auto n = r.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      auto name = r.str();
      AdamMoments m;
      m.first = r.shaped();
      m.second = Tensor(m.first.rows(), m.first.cols());
      r.payload(m.first);
      r.payload(m.second);
      s.moments.emplace(std::move(name), std::move(m));
    }
    ckpt.optimizer = std::move(s);
  }
  return ckpt;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace flm
