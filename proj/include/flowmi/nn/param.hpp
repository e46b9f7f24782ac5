#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowmi/error.hpp"

namespace flowmi::nn {

// Immutable map from named tensors into one flat scalar vector. Shared by a
// parameter vector, its gradients and the optimizer moments so they always
// agree on shapes.
class ParameterLayout {
  public:
    struct Entry {
        std::string name;
        std::vector<int> shape;
        int offset = 0;
        int size = 0;
    };

    const std::vector<Entry>& entries() const { return entries_; }
    int total_size() const { return total_; }

    const Entry& at(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) throw ConfigError("ParameterLayout: unknown tensor '" + std::string(name) + "'");
        return entries_[it->second];
    }

    bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  private:
    friend class LayoutBuilder;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    int total_ = 0;
};

class LayoutBuilder {
  public:
    // Returns the offset of the new tensor in the flat vector.
    int add(std::string name, std::vector<int> shape) {
        int size = 1;
        for (int d : shape) {
            if (d <= 0) throw ConfigError("LayoutBuilder: non-positive shape dimension in '" + name + "'");
            size *= d;
        }
        if (layout_.index_.count(name)) throw ConfigError("LayoutBuilder: duplicate tensor '" + name + "'");
        ParameterLayout::Entry e{std::move(name), std::move(shape), layout_.total_, size};
        layout_.index_.emplace(e.name, layout_.entries_.size());
        layout_.entries_.push_back(std::move(e));
        layout_.total_ += size;
        return layout_.entries_.back().offset;
    }

    std::shared_ptr<const ParameterLayout> build() { return std::make_shared<ParameterLayout>(std::move(layout_)); }

  private:
    ParameterLayout layout_;
};

// Flat vector of scalars plus the shared layout. Shapes are fixed for the
// lifetime of the vector; values are freely mutable.
class ParameterVector {
  public:
    ParameterVector() = default;
    explicit ParameterVector(std::shared_ptr<const ParameterLayout> layout)
        : layout_(std::move(layout)), v_(static_cast<std::size_t>(layout_->total_size()), 0.0) {}

    const ParameterLayout& layout() const { return *layout_; }
    const std::shared_ptr<const ParameterLayout>& layout_ptr() const { return layout_; }

    int size() const { return static_cast<int>(v_.size()); }
    std::span<double> values() { return v_; }
    std::span<const double> values() const { return v_; }

    std::span<double> tensor(std::string_view name) {
        const auto& e = layout_->at(name);
        return {v_.data() + e.offset, static_cast<std::size_t>(e.size)};
    }
    std::span<const double> tensor(std::string_view name) const {
        const auto& e = layout_->at(name);
        return {v_.data() + e.offset, static_cast<std::size_t>(e.size)};
    }

    void fill(double x) {
        for (double& t : v_) t = x;
    }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    bool same_layout(const ParameterVector& other) const { return layout_ == other.layout_; }

  private:
    std::shared_ptr<const ParameterLayout> layout_;
    std::vector<double> v_;
};

} // namespace flowmi::nn
