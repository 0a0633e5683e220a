#include "rexnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "rexnet/error.hpp"

namespace rexnet::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

namespace {

constexpr char kMagic[8] = {'R', 'X', 'N', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
void put_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("checkpoint truncated");
  return v;
}
void put_string(std::ostream& out, const std::string& s) {
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string get_string(std::istream& in) {
  const auto n = get_raw<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error("checkpoint truncated");
  return s;
}

std::vector<double> copy(std::span<const double> s) { return {s.begin(), s.end()}; }

void assign(std::vector<double>& dst, const Archive::Array& a, const std::string& name) {
  if (a.data.size() != dst.size())
    throw ShapeError("checkpoint array " + name + " has " + std::to_string(a.data.size()) +
                     " values, expected " + std::to_string(dst.size()));
  dst = a.data;
}

}  // namespace

void Archive::put(const std::string& name, std::vector<int> shape, std::vector<double> data) {
  if (Tensor::count(shape) != data.size()) throw ShapeError("archive: shape/data mismatch for " + name);
  arrays_[name] = Array{std::move(shape), std::move(data)};
}

void Archive::put_meta(const std::string& key, const std::string& value) { meta_[key] = value; }

const Archive::Array& Archive::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw Error("checkpoint has no array named " + name);
  return it->second;
}

const std::string& Archive::meta(const std::string& key) const {
  auto it = meta_.find(key);
  if (it == meta_.end()) throw Error("checkpoint has no metadata key " + key);
  return it->second;
}

void Archive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, 8);
  put_raw<std::uint32_t>(out, kVersion);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(meta_.size()));
  for (const auto& [k, v] : meta_) {
    put_string(out, k);
    put_string(out, v);
  }
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(arrays_.size()));
  for (const auto& [name, a] : arrays_) {
    put_string(out, name);
    put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
    for (int d : a.shape) put_raw<std::int32_t>(out, d);
    put_raw<std::uint64_t>(out, a.data.size());
    out.write(reinterpret_cast<const char*>(a.data.data()),
              static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Archive Archive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw Error("not a checkpoint file: " + path.string());
  const auto version = get_raw<std::uint32_t>(in);
  if (version != kVersion)
    throw Error("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  Archive ar;
  const auto n_meta = get_raw<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = get_string(in);
    ar.meta_[k] = get_string(in);
  }
  const auto n_arrays = get_raw<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_arrays; ++i) {
    Array a;
    std::string name = get_string(in);
    const auto rank = get_raw<std::uint32_t>(in);
    for (std::uint32_t r = 0; r < rank; ++r) a.shape.push_back(get_raw<std::int32_t>(in));
    const auto count = get_raw<std::uint64_t>(in);
    if (count != Tensor::count(a.shape)) throw Error("checkpoint array " + name + " is corrupt");
    a.data.resize(count);
    in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw Error("checkpoint truncated in array " + name);
    ar.arrays_[name] = std::move(a);
  }
  return ar;
}

void store_params(Archive& ar, const std::string& prefix, const std::vector<ParamRef>& params) {
  for (const auto& p : params)
    ar.put(prefix + "." + p.name, {static_cast<int>(p.value.size())}, copy(p.value));
}

void load_params(const Archive& ar, const std::string& prefix, const std::vector<ParamRef>& params) {
  for (const auto& p : params) {
    const std::string name = prefix + "." + p.name;
    const auto& a = ar.get(name);
    if (a.data.size() != p.value.size()) throw ShapeError("checkpoint array " + name + " has wrong size");
    std::copy(a.data.begin(), a.data.end(), p.value.begin());
  }
}

void store(Archive& ar, const std::string& prefix, CnnModel& model) {
  const CnnShape& s = model.shape();
  ar.put(prefix + ".shape", {8},
         {double(s.height), double(s.width), double(s.in_channels), double(s.c1), double(s.c2),
          double(s.c3), double(s.embed), double(s.classes)});
  for (const auto& p : model.params())
    ar.put(prefix + "." + p.name, {static_cast<int>(p.value.size())}, copy(p.value));
}

CnnModel load_cnn(const Archive& ar, const std::string& prefix) {
  const auto& g = ar.get(prefix + ".shape").data;
  if (g.size() != 8) throw Error("bad CNN shape record for " + prefix);
  CnnShape s{int(g[0]), int(g[1]), int(g[2]), int(g[3]), int(g[4]), int(g[5]), int(g[6]), int(g[7])};
  CnnModel model(s);
  for (auto& p : model.params()) {
    const std::string name = prefix + "." + p.name;
    const auto& a = ar.get(name);
    if (a.data.size() != p.value.size()) throw ShapeError("checkpoint array " + name + " has wrong size");
    std::copy(a.data.begin(), a.data.end(), p.value.begin());
  }
  return model;
}

void store(Archive& ar, const std::string& prefix, DenseNet& net) {
  std::vector<double> widths;
  widths.push_back(net.input_size());
  for (const auto& l : net.layers) widths.push_back(l.out_features);
  ar.put(prefix + ".widths", {static_cast<int>(widths.size())}, widths);
  for (const auto& p : net.params(prefix)) ar.put(p.name, {static_cast<int>(p.value.size())}, copy(p.value));
}

DenseNet load_dense(const Archive& ar, const std::string& prefix) {
  std::vector<int> widths;
  for (double w : ar.get(prefix + ".widths").data) widths.push_back(static_cast<int>(w));
  DenseNet net(widths);
  for (auto& p : net.params(prefix)) {
    const auto& a = ar.get(p.name);
    if (a.data.size() != p.value.size()) throw ShapeError("checkpoint array " + p.name + " has wrong size");
    std::copy(a.data.begin(), a.data.end(), p.value.begin());
  }
  return net;
}

void store(Archive& ar, const std::string& prefix, const Standardizer& s) {
  ar.put(prefix + ".mean", {static_cast<int>(s.mean.size())}, s.mean);
  ar.put(prefix + ".stddev", {static_cast<int>(s.stddev.size())}, s.stddev);
}

Standardizer load_standardizer(const Archive& ar, const std::string& prefix) {
  Standardizer s;
  s.mean = ar.get(prefix + ".mean").data;
  s.stddev = ar.get(prefix + ".stddev").data;
  std::vector<double> check(s.mean.size());
  assign(check, ar.get(prefix + ".stddev"), prefix + ".stddev");
  return s;
}

}  // namespace rexnet::nn
