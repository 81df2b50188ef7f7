#include "vrfb/grid.hpp"
#include <algorithm>

#include <cmath>

namespace vrfb {

Grid::Grid(const CaseConfig& cfg)
    : nx_(cfg.nx),
      ny_(cfg.ny),
      nze_(cfg.nz_electrode),
      nzc_(cfg.nz_channel),
      nz_(cfg.nz_electrode + cfg.nz_channel),
      L_(cfg.length),
      W_(cfg.width),
      te_(cfg.electrode_thickness),
      tc_(cfg.channel_thickness) {
    if (nx_ <= 0 || ny_ <= 0 || nze_ <= 0 || nzc_ <= 0)
        throw std::invalid_argument("grid: cell counts must be positive");
    if (L_ <= 0 || W_ <= 0 || te_ <= 0 || tc_ <= 0)
        throw std::invalid_argument("grid: dimensions must be positive");
    hx_ = L_ / nx_;
    hy_ = W_ / ny_;
    hze_ = te_ / nze_;
    hzc_ = tc_ / nzc_;
    full_span_ = (cfg.inlet_span == InletSpan::FullHeight);

    // Inlet/outlet patches: a y-band of the given width centered on the face,
    // rasterized to whole cell columns (nearest-boundary rounding, at least
    // one column).
    const double y_lo = 0.5 * (W_ - cfg.inlet_width);
    const double y_hi = 0.5 * (W_ + cfg.inlet_width);
    if (y_lo < -1e-12 || y_hi > W_ + 1e-12)
        throw std::invalid_argument("inlet_width: patch exceeds the cell width");
    band_j0_ = static_cast<int>(std::floor(y_lo / hy_ + 0.5));
    band_j1_ = static_cast<int>(std::ceil(y_hi / hy_ - 0.5));
    band_j0_ = std::max(0, std::min(band_j0_, ny_ - 1));
    band_j1_ = std::max(1, std::min(band_j1_, ny_));
    if (band_j1_ <= band_j0_) {
        const int jc = std::max(0, std::min(static_cast<int>(0.5 * (y_lo + y_hi) / hy_), ny_ - 1));
        band_j0_ = jc;
        band_j1_ = jc + 1;
    }
}

double Grid::boundary_area() const {
    double area = 0.0;
    for (int k = 0; k < nz_; ++k)
        for (int j = 0; j < ny_; ++j)
            area += 2.0 * ax(k); // i = 0 and i = nx
    for (int k = 0; k < nz_; ++k)
        for (int i = 0; i < nx_; ++i)
            area += 2.0 * ay(k);
    area += 2.0 * nx_ * ny_ * az(); // membrane + collector
    return area;
}

} // namespace vrfb
