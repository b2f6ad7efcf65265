#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <functional>
#include <vector>

#include "rcml/rng.hpp"
#include "rcml/tensor.hpp"

namespace testing {

inline rcml::Tensor random_tensor(rcml::Shape shape, rcml::Rng& rng, bool requires_grad = true, double stddev = 1.0) {
    std::vector<double> v(shape.numel());
    for (double& x : v) x = stddev * rng.normal();
    return rcml::Tensor(shape, std::move(v), requires_grad);
}

// Value of `f` with no tape, for finite differences.
inline double value_of(const std::function<rcml::Tensor()>& f) {
    rcml::Tape::Scope none(nullptr);
    return f().item();
}

// Central-difference gradient of `f` with respect to every entry of `x`.
inline std::vector<double> numeric_grad(const std::function<rcml::Tensor()>& f, rcml::Tensor x, double h = 1e-5) {
    std::vector<double> g(x.numel());
    auto v = x.mutable_values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double keep = v[i];
        v[i] = keep + h;
        const double up = value_of(f);
        v[i] = keep - h;
        const double down = value_of(f);
        v[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Reverse-mode gradient of `f` with respect to `x`.
inline std::vector<double> analytic_grad(const std::function<rcml::Tensor()>& f, rcml::Tensor x) {
    rcml::Tape tape;
    rcml::Tape::Scope scope(&tape);
    x.zero_grad();
    rcml::backward(f());
    const auto g = x.grad();
    return std::vector<double>(g.begin(), g.end());
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

inline double fd_error(const std::function<rcml::Tensor()>& f, rcml::Tensor x) {
    return max_rel_error(analytic_grad(f, x), numeric_grad(f, x));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rcml_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os << bytes;
}

}  // namespace testing
