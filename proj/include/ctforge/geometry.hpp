#pragma once

#include <cstdint>
#include <vector>

namespace ctforge {

struct Vec3i {
    int x = 0;
    int y = 0;
    int z = 0;

    friend bool operator==(const Vec3i&, const Vec3i&) = default;
};

struct Vec3d {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3d&, const Vec3d&) = default;
};

// Dense 3D grid of doubles, x-fastest storage order.
class Grid3 {
public:
    Grid3() = default;
    Grid3(int nx, int ny, int nz, double fill = 0.0)
        : nx_(nx), ny_(ny), nz_(nz),
          data_(static_cast<std::size_t>(nx) * ny * nz, fill) {}

    int nx() const noexcept { return nx_; }
    int ny() const noexcept { return ny_; }
    int nz() const noexcept { return nz_; }
    Vec3i dims() const noexcept { return {nx_, ny_, nz_}; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int x, int y, int z) {
        return data_[index(x, y, z)];
    }
    double at(int x, int y, int z) const {
        return data_[index(x, y, z)];
    }
    std::size_t index(int x, int y, int z) const noexcept {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx_) *
                   (static_cast<std::size_t>(y) +
                    static_cast<std::size_t>(ny_) * static_cast<std::size_t>(z));
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Grid3&, const Grid3&) = default;

private:
    int nx_ = 0;
    int ny_ = 0;
    int nz_ = 0;
    std::vector<double> data_;
};

}  // namespace ctforge
