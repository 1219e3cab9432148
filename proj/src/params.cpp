#include "mov/params.hpp"

#include <cstdio>
#include <stdexcept>

#include "mov/bytes.hpp"

namespace mov {

Tensor& ParamSet::get_or_create(const std::string& name, const std::vector<int>& shape,
                                const std::function<void(Tensor&)>& init) {
    auto it = params_.find(name);
    if (it != params_.end()) {
        if (it->second.value.shape() != shape) {
            throw std::invalid_argument("parameter shape changed between uses: " + name);
        }
        return it->second.value;
    }
    ParamState st;
    st.value = Tensor(shape);
    init(st.value);
    if (!st.value.all_finite()) {
        throw std::invalid_argument("parameter initialized to non-finite values: " + name);
    }
    st.m = Tensor(shape);
    st.v = Tensor(shape);
    auto [pos, inserted] = params_.emplace(name, std::move(st));
    (void)inserted;
    return pos->second.value;
}

bool ParamSet::has(const std::string& name) const { return params_.count(name) != 0; }

ParamState& ParamSet::state(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

const ParamState& ParamSet::state(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

Tensor& ParamSet::value(const std::string& name) { return state(name).value; }
const Tensor& ParamSet::value(const std::string& name) const { return state(name).value; }

void ParamSet::set_trainable(const std::string& name, bool trainable) {
    state(name).trainable = trainable;
}

bool ParamSet::trainable(const std::string& name) const { return state(name).trainable; }

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, st] : params_) out.push_back(name);
    return out;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, st] : params_) n += st.value.size();
    return n;
}

void ParamSet::clone_prefix(const std::string& src_prefix, const std::string& dst_prefix) {
    std::vector<std::string> src_names;
    for (const auto& [name, st] : params_) {
        if (name.rfind(src_prefix, 0) == 0) src_names.push_back(name);
    }
    if (src_names.empty()) {
        throw std::invalid_argument("clone_prefix: no parameters under " + src_prefix);
    }
    for (const auto& name : src_names) {
        std::string dst = dst_prefix + name.substr(src_prefix.size());
        ParamState st;
        st.value = params_.at(name).value;
        st.m = Tensor(st.value.shape());
        st.v = Tensor(st.value.shape());
        params_[dst] = std::move(st);
    }
}

void ParamSet::save(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    std::fwrite("MOVP", 1, 4, f);
    bytes::put_u8(f, 1);
    bytes::put_u32_le(f, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, st] : params_) {
        bytes::put_string(f, name);
        bytes::put_u8(f, st.trainable ? 1 : 0);
        bytes::put_u8(f, static_cast<std::uint8_t>(st.value.rank()));
        for (int a = 0; a < st.value.rank(); ++a) {
            bytes::put_u32_le(f, static_cast<std::uint32_t>(st.value.extent(a)));
        }
        for (std::size_t i = 0; i < st.value.size(); ++i) {
            bytes::put_f64_le(f, st.value.data()[i]);
        }
    }
    std::fclose(f);
}

ParamSet ParamSet::load(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open: " + path);
    try {
        char magic[4];
        if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "MOVP", 4) != 0) {
            throw std::runtime_error("bad param file magic: " + path);
        }
        if (bytes::get_u8(f) != 1) throw std::runtime_error("bad param file version: " + path);
        std::uint32_t count = bytes::get_u32_le(f);
        ParamSet ps;
        for (std::uint32_t i = 0; i < count; ++i) {
            std::string name = bytes::get_string(f);
            bool trainable = bytes::get_u8(f) != 0;
            int rank = bytes::get_u8(f);
            if (rank == 0 || rank > 8) throw std::runtime_error("bad param rank: " + name);
            std::vector<int> shape(static_cast<std::size_t>(rank));
            std::size_t n = 1;
            for (int a = 0; a < rank; ++a) {
                std::uint32_t e = bytes::get_u32_le(f);
                if (e == 0 || e > (1u << 28)) throw std::runtime_error("bad extent: " + name);
                shape[static_cast<std::size_t>(a)] = static_cast<int>(e);
                n *= e;
            }
            std::vector<double> data(n);
            for (std::size_t k = 0; k < n; ++k) data[k] = bytes::get_f64_le(f);
            ParamState st;
            st.value = Tensor::from(std::move(shape), std::move(data));
            if (!st.value.all_finite()) throw std::runtime_error("non-finite param: " + name);
            st.trainable = trainable;
            st.m = Tensor(st.value.shape());
            st.v = Tensor(st.value.shape());
            ps.params_[name] = std::move(st);
        }
        std::fclose(f);
        return ps;
    } catch (...) {
        std::fclose(f);
        throw;
    }
}

}  // namespace mov
