#ifndef MSFCN_PARAMS_HPP
#define MSFCN_PARAMS_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "msfcn/tensor.hpp"

namespace msfcn {

// One learnable weight tensor with its gradient accumulator.
template <typename T>
struct ParamT {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;
  bool trainable = true;

  ParamT(std::string n, TensorT<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
};

// Ordered collection of named parameters. Insertion order is the
// canonical order used by the optimizer and the checkpoint writer.
template <typename T>
class ParamStoreT {
 public:
  ParamT<T>* add(const std::string& name, TensorT<T> value) {
    if (index_.count(name))
      throw ValueError("duplicate parameter name: " + name);
    items_.push_back(std::make_unique<ParamT<T>>(name, std::move(value)));
    index_[name] = items_.size() - 1;
    return items_.back().get();
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  ParamT<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter: " + name);
    return *items_[it->second];
  }
  const ParamT<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValueError("unknown parameter: " + name);
    return *items_[it->second];
  }

  size_t size() const { return items_.size(); }
  ParamT<T>& operator[](size_t i) { return *items_[i]; }
  const ParamT<T>& operator[](size_t i) const { return *items_[i]; }

  int64_t total_elems() const {
    int64_t total = 0;
    for (const auto& p : items_) total += p->value.elems();
    return total;
  }

  void zero_grads() {
    for (auto& p : items_)
      std::fill(p->grad.data.begin(), p->grad.data.end(), T(0));
  }

  // 64-bit twin with identical names/values, for gradient-check paths.
  template <typename U>
  ParamStoreT<U> cast() const {
    ParamStoreT<U> out;
    for (const auto& p : items_) {
      TensorT<U> v(p->value.shape);
      for (size_t i = 0; i < v.data.size(); ++i)
        v.data[i] = static_cast<U>(p->value.data[i]);
      out.add(p->name, std::move(v))->trainable = p->trainable;
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<ParamT<T>>> items_;
  std::map<std::string, size_t> index_;
};

using Param = ParamT<float>;
using ParamStore = ParamStoreT<float>;

}  // namespace msfcn

#endif
