#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rexnet/cnn.hpp"
#include "rexnet/dense_net.hpp"

namespace rexnet::nn {

// Named-array container used for every model file.
//
// Layout (little-endian):
//   "RXNTCKPT"                      8 bytes magic
//   u32 version                     currently 1
//   u32 n_meta, then n_meta x (u32 len, key bytes, u32 len, value bytes)
//   u32 n_arrays, then per array:
//     u32 len, name bytes, u32 rank, rank x i32 dims, u64 count, count x f64
// Arrays and metadata are written in key order so identical content gives
// identical bytes.
class Archive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  struct Array {
    std::vector<int> shape;
    std::vector<double> data;
  };

  void put(const std::string& name, std::vector<int> shape, std::vector<double> data);
  void put_meta(const std::string& key, const std::string& value);
  const Array& get(const std::string& name) const;
  const std::string& meta(const std::string& key) const;
  bool has(const std::string& name) const { return arrays_.count(name) != 0; }
  bool has_meta(const std::string& key) const { return meta_.count(key) != 0; }

  void save(const std::filesystem::path& path) const;
  static Archive load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> meta_;
  std::map<std::string, Array> arrays_;
};

// Flat parameter lists, one array per ParamRef named prefix.name.
void store_params(Archive& ar, const std::string& prefix, const std::vector<ParamRef>& params);
void load_params(const Archive& ar, const std::string& prefix, const std::vector<ParamRef>& params);

void store(Archive& ar, const std::string& prefix, CnnModel& model);
CnnModel load_cnn(const Archive& ar, const std::string& prefix);

void store(Archive& ar, const std::string& prefix, DenseNet& net);
DenseNet load_dense(const Archive& ar, const std::string& prefix);

void store(Archive& ar, const std::string& prefix, const Standardizer& s);
Standardizer load_standardizer(const Archive& ar, const std::string& prefix);

}  // namespace rexnet::nn
