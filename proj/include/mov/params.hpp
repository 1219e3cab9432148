#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mov/tensor.hpp"

namespace mov {

struct ParamState {
    Tensor value;
    bool trainable = true;
    Tensor m;  // AdamW first moment, same shape as value
    Tensor v;  // AdamW second moment
};

// Named parameter store. Iteration order is the sorted name order (std::map),
// which keeps every reduction and serialization deterministic.
class ParamSet {
public:
    // Memoized creation: init runs only the first time a name appears, so the
    // call order of a forward pass cannot change initialization.
    Tensor& get_or_create(const std::string& name, const std::vector<int>& shape,
                          const std::function<void(Tensor&)>& init);

    bool has(const std::string& name) const;
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    ParamState& state(const std::string& name);
    const ParamState& state(const std::string& name) const;

    void set_trainable(const std::string& name, bool trainable);
    bool trainable(const std::string& name) const;

    std::vector<std::string> names() const;
    std::size_t count() const { return params_.size(); }
    std::size_t scalar_count() const;

    // Copies every parameter value whose name starts with src_prefix to the
    // same suffix under dst_prefix, creating fresh entries (moments zeroed).
    void clone_prefix(const std::string& src_prefix, const std::string& dst_prefix);

    void save(const std::string& path) const;
    static ParamSet load(const std::string& path);

private:
    std::map<std::string, ParamState> params_;
};

}  // namespace mov
