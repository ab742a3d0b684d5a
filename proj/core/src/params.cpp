#include "pshape/params.hpp"

#include <cmath>

namespace pshape {

Tensor& ParameterSet::add(const std::string& name, Tensor t) {
  check(!has(name), "parameter \"", name, "\" registered twice");
  items_.emplace_back(name, std::move(t));
  return items_.back().second;
}

Tensor& ParameterSet::at(const std::string& name) {
  for (auto& [n, t] : items_)
    if (n == name) return t;
  fail("no parameter named \"", name, "\"");
}

const Tensor& ParameterSet::at(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  fail("no parameter named \"", name, "\"");
}

bool ParameterSet::has(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return true;
  return false;
}

int64_t ParameterSet::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

Tensor glorot_uniform(std::vector<int64_t> shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

void save_parameters(const std::filesystem::path& path, const ParameterSet& params,
                     const std::string& kind, const Json& extra_meta) {
  Container c;
  c.meta["kind"] = kind;
  c.meta["layout"] = params.layout.is_null() ? Json::object() : params.layout;
  for (const auto& item : extra_meta.items()) c.meta[item.key()] = item.value();
  for (const auto& [name, t] : params.items()) c.arrays.push_back({name, t});
  write_container(path, c);
}

LoadedParameters load_parameters(const std::filesystem::path& path,
                                 const std::string& expected_kind) {
  Container c = read_container(path, expected_kind);
  LoadedParameters out;
  out.meta = c.meta;
  out.params.layout = c.meta.value("layout", Json::object());
  for (auto& a : c.arrays) out.params.add(a.name, std::move(a.tensor));
  return out;
}

}  // namespace pshape
