#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace moco {

/// Dense 2-D image, row-major, y is the slow index.
struct Image2D {
    int nx = 0;
    int ny = 0;
    std::vector<float> v;

    Image2D() = default;
    Image2D(int nx_, int ny_, float fill = 0.f) : nx(nx_), ny(ny_), v(static_cast<size_t>(nx_) * ny_, fill) {}

    float& at(int x, int y) { return v[static_cast<size_t>(y) * nx + x]; }
    float at(int x, int y) const { return v[static_cast<size_t>(y) * nx + x]; }
    size_t size() const { return v.size(); }
};

/// Reconstruction grid: voxel (i,j,k) center sits at origin + spacing .* (i,j,k).
struct GridSpec {
    int nx = 0, ny = 0, nz = 0;
    Eigen::Vector3d spacing{1, 1, 1};
    Eigen::Vector3d origin{0, 0, 0};

    static GridSpec centered(int nx, int ny, int nz, const Eigen::Vector3d& spacing);
    void validate() const;
};

/// Attenuation volume, 32-bit values, z-major storage: index (z*ny + y)*nx + x.
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    Eigen::Vector3d spacing{1, 1, 1};
    Eigen::Vector3d origin{0, 0, 0};
    std::vector<float> v;

    Volume() = default;
    explicit Volume(const GridSpec& g)
        : nx(g.nx), ny(g.ny), nz(g.nz), spacing(g.spacing), origin(g.origin),
          v(static_cast<size_t>(g.nx) * g.ny * g.nz, 0.f) {}

    float& at(int x, int y, int z) { return v[(static_cast<size_t>(z) * ny + y) * nx + x]; }
    float at(int x, int y, int z) const { return v[(static_cast<size_t>(z) * ny + y) * nx + x]; }

    GridSpec grid() const { return GridSpec{nx, ny, nz, spacing, origin}; }

    /// Axial slice nearest to world z=0 (exact when the grid has a z=0 layer).
    Image2D central_slice() const;
    int central_z_index() const;
};

inline GridSpec GridSpec::centered(int nx, int ny, int nz, const Eigen::Vector3d& spacing) {
    GridSpec g;
    g.nx = nx; g.ny = ny; g.nz = nz;
    g.spacing = spacing;
    g.origin = Eigen::Vector3d(-0.5 * (nx - 1) * spacing.x(),
                               -0.5 * (ny - 1) * spacing.y(),
                               -0.5 * (nz - 1) * spacing.z());
    return g;
}

inline void GridSpec::validate() const {
    if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("GridSpec: dimensions must be >= 1");
    if (!(spacing.x() > 0 && spacing.y() > 0 && spacing.z() > 0))
        throw std::invalid_argument("GridSpec: spacing must be positive");
}

inline int Volume::central_z_index() const {
    // nearest layer to z = 0
    double k = (0.0 - origin.z()) / spacing.z();
    int ki = static_cast<int>(std::lround(k));
    if (ki < 0) ki = 0;
    if (ki > nz - 1) ki = nz - 1;
    return ki;
}

inline Image2D Volume::central_slice() const {
    Image2D s(nx, ny);
    int k = central_z_index();
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            s.at(x, y) = at(x, y, k);
    return s;
}

} // namespace moco
