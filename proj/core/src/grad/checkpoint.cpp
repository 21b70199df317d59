#include "hdiff/grad/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace hdiff::grad {
namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                              static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw Error("IDCK: truncated stream");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw Error("IDCK: truncated stream");
  return s;
}

void put_tensor(std::ostream& os, const std::string& name, const Mat& m) {
  put_string(os, name);
  put_u32(os, 2);
  put_u32(os, static_cast<std::uint32_t>(m.rows()));
  put_u32(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[i])));
}

std::pair<std::string, Mat> get_tensor(std::istream& is) {
  std::string name = get_string(is);
  const std::uint32_t rank = get_u32(is);
  if (rank < 1 || rank > 2) throw Error("IDCK: unsupported tensor rank for " + name);
  std::array<std::uint32_t, 2> dims{1, 1};
  for (std::uint32_t r = 0; r < rank; ++r) dims[r] = get_u32(is);
  // Rank-1 tensors load as row vectors.
  Mat m = rank == 1 ? Mat(1, dims[0]) : Mat(dims[0], dims[1]);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(std::bit_cast<float>(get_u32(is)));
  return {std::move(name), std::move(m)};
}

}  // namespace

void write_checkpoint(std::ostream& os, const ParamStore& params, const AdamState* optimizer,
                      const std::string& metadata) {
  os.write("IDCK", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) put_tensor(os, p.name, p.value);
  put_u32(os, optimizer ? 1U : 0U);
  if (optimizer) {
    if (optimizer->m.size() != params.size()) throw Error("IDCK: optimizer state does not match parameters");
    put_u32(os, static_cast<std::uint32_t>(optimizer->step));
    for (std::size_t i = 0; i < params.size(); ++i) put_tensor(os, params.at(i).name, optimizer->m[i]);
    for (std::size_t i = 0; i < params.size(); ++i) put_tensor(os, params.at(i).name, optimizer->v[i]);
  }
  put_string(os, metadata);
}

void write_checkpoint(const std::string& path, const ParamStore& params, const AdamState* optimizer,
                      const std::string& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  write_checkpoint(os, params, optimizer, metadata);
  if (!os) throw Error("write failed: " + path);
}

Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::memcmp(magic.data(), "IDCK", 4) != 0) throw Error("IDCK: bad magic");
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) throw Error("IDCK: unsupported version " + std::to_string(version));
  const std::uint32_t count = get_u32(is);
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) ck.params.push_back(get_tensor(is));
  const std::uint32_t flag = get_u32(is);
  if (flag > 1) throw Error("IDCK: bad optimizer flag");
  if (flag == 1) {
    AdamState st;
    st.step = get_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) st.m.push_back(get_tensor(is).second);
    for (std::uint32_t i = 0; i < count; ++i) st.v.push_back(get_tensor(is).second);
    ck.optimizer = std::move(st);
  }
  // Files without a metadata section are accepted.
  if (is.peek() != std::char_traits<char>::eof()) ck.metadata = get_string(is);
  return ck;
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path);
  return read_checkpoint(is);
}

void load_params(ParamStore& store, const Checkpoint& ckpt) {
  if (ckpt.params.size() != store.size()) {
    throw Error("checkpoint has " + std::to_string(ckpt.params.size()) + " tensors, model expects " +
                std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store.at(i);
    const auto& [name, value] = ckpt.params[i];
    if (name != p.name) throw Error("checkpoint tensor " + name + " where " + p.name + " expected");
    if (value.rows() != p.value.rows() || value.cols() != p.value.cols()) {
      throw Error("checkpoint tensor " + name + " has mismatched shape");
    }
    p.value = value;
  }
}

void round_to_f32(ParamStore& store) {
  for (Parameter& p : store) p.value = p.value.cast<float>().cast<double>();
}

}  // namespace hdiff::grad
