#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pshape/container.hpp"
#include "pshape/rng.hpp"
#include "pshape/tensor.hpp"

namespace pshape {

// Named, insertion-ordered parameter map plus a free-form layout descriptor
// (layer sizes, kernel shapes) that travels with the weights on disk.
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;

  size_t count() const { return items_.size(); }
  int64_t total_size() const;

  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }

  Json layout;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Uniform in +/- sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::vector<int64_t> shape, int64_t fan_in, int64_t fan_out, Rng& rng);

void save_parameters(const std::filesystem::path& path, const ParameterSet& params,
                     const std::string& kind, const Json& extra_meta = Json::object());

struct LoadedParameters {
  ParameterSet params;
  Json meta;
};

LoadedParameters load_parameters(const std::filesystem::path& path,
                                 const std::string& expected_kind);

}  // namespace pshape
