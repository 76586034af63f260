#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/tensor.hpp"

namespace diffimpute {

/// Named parameters with one gradient slot each, kept in insertion order.
template <class Real = double>
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor<Real> value;
        Tensor<Real> grad;
    };

    Tensor<Real>& add(const std::string& name, Tensor<Real> init) {
        if (index_.count(name)) throw InvariantError("duplicate parameter name '" + name + "'");
        index_.emplace(name, entries_.size());
        Tensor<Real> grad(init.shape());
        entries_.push_back(Entry{name, std::move(init), std::move(grad)});
        return entries_.back().value;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t size() const { return entries_.size(); }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw InvariantError("unknown parameter '" + name + "'");
        return it->second;
    }

    Tensor<Real>& value(const std::string& name) { return entries_[index_of(name)].value; }
    const Tensor<Real>& value(const std::string& name) const { return entries_[index_of(name)].value; }
    Tensor<Real>& grad(const std::string& name) { return entries_[index_of(name)].grad; }
    const Tensor<Real>& grad(const std::string& name) const { return entries_[index_of(name)].grad; }

    Entry& entry(std::size_t i) { return entries_[i]; }
    const Entry& entry(std::size_t i) const { return entries_[i]; }
    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    void zero_grad() {
        for (auto& e : entries_) e.grad.fill(Real(0));
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace diffimpute
